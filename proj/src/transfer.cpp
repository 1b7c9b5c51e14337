#include "tectum/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "tectum/errors.hpp"

namespace tectum {

std::string to_string(SweepKind k) { return k == SweepKind::budget ? "budget" : "noise"; }

SweepKind sweep_kind_from_string(const std::string &s)
{
    if (s == "budget") return SweepKind::budget;
    if (s == "noise") return SweepKind::noise;
    throw ConfigError("unknown sweep kind '" + s + "' (expected budget or noise)");
}

AccuracyTable::AccuracyTable(SweepKind kind, std::vector<AccuracyRow> rows) : kind_(kind), rows_(std::move(rows))
{
    std::set<std::pair<std::string, double>> seen;
    for (const auto &r : rows_) {
        if (!std::isfinite(r.accuracy) || r.accuracy < 0.0 || r.accuracy > 100.0) {
            throw DataError("accuracy out of range [0, 100] for " + r.model + ": " + std::to_string(r.accuracy));
        }
        if (kind_ == SweepKind::budget && !(r.condition > 0.0 && r.condition <= 1.0)) {
            throw DataError("budget condition out of range (0, 1] for " + r.model + ": " + std::to_string(r.condition));
        }
        if (kind_ == SweepKind::noise && !(r.condition >= 0.0 && std::isfinite(r.condition))) {
            throw DataError("noise condition must be non-negative for " + r.model + ": " + std::to_string(r.condition));
        }
        if (!seen.emplace(r.model, r.condition).second) {
            throw DataError("duplicate row for model " + r.model + " at condition " + std::to_string(r.condition));
        }
    }
    for (const auto &m : models()) {
        if (!seen.count({m, reference_condition()})) {
            throw DataError("missing reference condition " + std::to_string(reference_condition()) + " for model " + m);
        }
    }
}

std::vector<std::string> AccuracyTable::models() const
{
    std::vector<std::string> out;
    for (const auto &r : rows_) {
        if (std::find(out.begin(), out.end(), r.model) == out.end()) out.push_back(r.model);
    }
    return out;
}

namespace {

std::string trim(std::string s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_number(const std::string &field, std::size_t line)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(field, &used);
    } catch (const std::exception &) {
        used = 0;
    }
    if (used == 0 || used != field.size()) {
        throw DataError("line " + std::to_string(line) + ": '" + field + "' is not a number");
    }
    return v;
}

} // namespace

AccuracyTable parse_accuracy_table(std::istream &in, SweepKind kind)
{
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    std::vector<AccuracyRow> rows;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(trim(f));
        if (fields.size() != 3) {
            throw DataError("line " + std::to_string(lineno) + ": expected 3 fields, got " + std::to_string(fields.size()));
        }
        if (!header) {
            if (fields[0] != "model" || fields[1] != "condition" || fields[2] != "accuracy") {
                throw DataError("expected header 'model,condition,accuracy'");
            }
            header = true;
            continue;
        }
        rows.push_back({fields[0], parse_number(fields[1], lineno), parse_number(fields[2], lineno)});
    }
    if (!header) throw DataError("accuracy table is empty");
    return AccuracyTable(kind, std::move(rows));
}

AccuracyTable load_accuracy_table(const std::filesystem::path &path, SweepKind kind)
{
    std::ifstream in(path);
    if (!in) throw DataError("file not found: " + path.string());
    try {
        return parse_accuracy_table(in, kind);
    } catch (const DataError &e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

namespace {

double mean_normalised_drop(const AccuracyTable &t, const std::string &model)
{
    const double ref_cond = t.reference_condition();
    const AccuracyRow *ref = nullptr;
    for (const auto &r : t.rows()) {
        if (r.model == model && r.condition == ref_cond) ref = &r;
    }
    if (ref == nullptr) throw DataError("unknown model '" + model + "'");

    double sum = 0.0;
    std::size_t count = 0;
    for (const auto &r : t.rows()) {
        if (r.model != model || r.condition == ref_cond) continue;
        sum += (ref->accuracy - r.accuracy) / std::abs(ref_cond - r.condition);
        ++count;
    }
    if (count == 0) {
        throw DataError("model '" + model + "' has no " +
                        (t.kind() == SweepKind::budget ? std::string("reduced-budget") : std::string("non-zero-noise")) +
                        " rows");
    }
    return sum / static_cast<double>(count);
}

} // namespace

double budget_degradation_score(const AccuracyTable &t, const std::string &model)
{
    if (t.kind() != SweepKind::budget) throw DataError("budget score needs a budget sweep table");
    return mean_normalised_drop(t, model);
}

double noise_degradation_score(const AccuracyTable &t, const std::string &model)
{
    if (t.kind() != SweepKind::noise) throw DataError("noise score needs a noise sweep table");
    return mean_normalised_drop(t, model);
}

double degradation_score(const AccuracyTable &t, const std::string &model)
{
    return t.kind() == SweepKind::budget ? budget_degradation_score(t, model) : noise_degradation_score(t, model);
}

std::map<std::string, double> degradation_scores(const AccuracyTable &t)
{
    std::map<std::string, double> out;
    for (const auto &m : t.models()) out[m] = degradation_score(t, m);
    return out;
}

} // namespace tectum
