#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tectum/groups.hpp"
#include "tectum/snn.hpp"

namespace tectum {

inline constexpr double kDefaultEpsilon = 1e-6;

/// Relative change in percent: (after - before) / before * 100.
double percent_change(double after, double before);

/// Energy sensitivity: spike change per unit of absolute error change.
double esi(double delta_spike_pct, double delta_mse_pct, double epsilon = kDefaultEpsilon);

/// Robustness sensitivity: MSE increase normalised by the baseline MSE.
/// Throws DataError if the baseline is not positive.
double rsi(double mse_after, double mse_baseline);

struct AblationRecord {
    std::string group;
    std::size_t nodes = 0;
    double mse_before = 0.0;
    double mse_after = 0.0;
    double spikes_before = 0.0;
    double spikes_after = 0.0;
    double delta_mse = 0.0;
    double delta_mse_pct = 0.0;
    double delta_spike_pct = 0.0;
    double esi = 0.0;
    double rsi = 0.0;
    bool is_input_port = false;
};

/// Fills the derived fields from the raw measurements.
AblationRecord make_record(std::string group, std::size_t nodes, double mse_before, double mse_after,
                           double spikes_before, double spikes_after, bool is_input_port,
                           double epsilon = kDefaultEpsilon);

/// Throws NumericError unless every derived field equals its recomputation.
void check_record(const AblationRecord &r, double epsilon = kDefaultEpsilon);

nlohmann::json to_json(const AblationRecord &r);
AblationRecord record_from_json(const nlohmann::json &j);

/// Ablates each named group in turn (no retraining) and measures it against
/// the intact `baseline`, evaluated on the same windows. Conditions run
/// concurrently; the output follows the order of `groups`.
std::vector<AblationRecord> run_ablation_sweep(const SNNModel &m, const GroupConfig &gc,
                                               std::span<const LorenzWindow> windows,
                                               const std::vector<std::string> &groups, double epsilon,
                                               const EvalMetrics &baseline);

/// Same, evaluating the intact baseline first.
std::vector<AblationRecord> run_ablation_sweep(const SNNModel &m, const GroupConfig &gc,
                                               std::span<const LorenzWindow> windows,
                                               const std::vector<std::string> &groups,
                                               double epsilon = kDefaultEpsilon);

/// Error-increasing records (delta_mse > 0) ordered by ascending |ESI|, ties by name.
std::vector<AblationRecord> rank_esi(std::span<const AblationRecord> records, bool exclude_input_ports);

/// Records ordered by descending RSI, ties by name.
std::vector<AblationRecord> rank_rsi(std::span<const AblationRecord> records);

struct AxisCandidate {
    std::string group;
    std::size_t nodes = 0;
    std::string index_name; // "100xESI" or "RSI"
    double index_value = 0.0;
};

struct DualAxisReport {
    std::vector<AblationRecord> esi_ranking;      // all error-increasing records
    std::vector<AblationRecord> esi_internal;     // same, input ports excluded
    std::vector<AblationRecord> rsi_ranking;
    std::vector<AblationRecord> error_decreasing; // listed, never ranked
    std::optional<AxisCandidate> top_energy;
    std::optional<AxisCandidate> top_robustness;
    std::string energy_note;
    std::vector<AblationRecord> records;
};

/// Throws DataError on an empty record list.
DualAxisReport dual_axis_report(std::span<const AblationRecord> records, const GroupConfig &gc);

nlohmann::json to_json(const DualAxisReport &r);
std::string to_markdown(const DualAxisReport &r);

} // namespace tectum
