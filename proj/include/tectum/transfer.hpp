#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <vector>

namespace tectum {

enum class SweepKind { budget, noise };

std::string to_string(SweepKind k);
SweepKind sweep_kind_from_string(const std::string &s);

struct AccuracyRow {
    std::string model;
    double condition = 0.0; // budget ratio or noise standard deviation
    double accuracy = 0.0;  // percent
};

/// Accuracy sweep for one or more models. Validated on construction: budget
/// conditions in (0, 1], noise conditions >= 0, accuracy in [0, 100], one row
/// per (model, condition) and a reference row (1.0 budget / 0.0 noise) per model.
class AccuracyTable {
public:
    AccuracyTable(SweepKind kind, std::vector<AccuracyRow> rows);

    SweepKind kind() const { return kind_; }
    const std::vector<AccuracyRow> &rows() const { return rows_; }
    /// Model names in first-appearance order.
    std::vector<std::string> models() const;
    double reference_condition() const { return kind_ == SweepKind::budget ? 1.0 : 0.0; }

private:
    SweepKind kind_;
    std::vector<AccuracyRow> rows_;
};

/// CSV with header `model,condition,accuracy`.
AccuracyTable parse_accuracy_table(std::istream &in, SweepKind kind);
AccuracyTable load_accuracy_table(const std::filesystem::path &path, SweepKind kind);

/// Mean accuracy drop per unit of budget reduction over the reduced-budget rows.
double budget_degradation_score(const AccuracyTable &t, const std::string &model);

/// Mean accuracy drop per unit of noise standard deviation over the noisy rows.
double noise_degradation_score(const AccuracyTable &t, const std::string &model);

/// Dispatches on the table kind.
double degradation_score(const AccuracyTable &t, const std::string &model);

std::map<std::string, double> degradation_scores(const AccuracyTable &t);

} // namespace tectum
