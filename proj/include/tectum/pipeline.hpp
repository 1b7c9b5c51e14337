#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tectum/attribution.hpp"
#include "tectum/circuit.hpp"
#include "tectum/dynamics.hpp"
#include "tectum/groups.hpp"
#include "tectum/snn.hpp"
#include "tectum/transfer.hpp"

namespace tectum {

/// Groups swept when a config does not name its own.
const std::vector<std::string> &default_sweep_groups();

/**
 * Everything one invocation needs. Exactly one of `matrix_path` and
 * `synthesis` is set. The global seed is pushed into the synthesis and
 * training seeds by apply_seed(); the membrane and synapse parameters of
 * the propagation check always follow the training ones.
 */
struct RunConfig {
    std::optional<std::filesystem::path> matrix_path;
    std::optional<SynthesisSpec> synthesis;
    std::optional<std::filesystem::path> groups_path; // built-in groups when empty
    PropagationParams propagation;
    std::vector<std::string> pathways{"R2O", "R2E"};
    TrainConfig train;
    std::vector<std::string> ablation_groups = default_sweep_groups(); // "all" expands at run time
    double epsilon = kDefaultEpsilon;
    std::optional<std::filesystem::path> budget_table;
    std::optional<std::filesystem::path> noise_table;
    std::filesystem::path output_dir = "tectum_out";
    std::uint64_t seed = 42;

    /// Throws ConfigError on an inconsistent config.
    void validate() const;
    void apply_seed(std::uint64_t s);
};

/// Relative paths inside the document resolve against `base_dir`.
RunConfig run_config_from_json(const nlohmann::json &j, const std::filesystem::path &base_dir = {});
nlohmann::json run_config_to_json(const RunConfig &cfg);
RunConfig load_run_config(const std::filesystem::path &path);

/// FNV-1a (64 bit) of the canonical config document, as 16 hex digits.
std::string config_hash(const RunConfig &cfg);

/// Adds seed and config hash to a document.
nlohmann::json stamp(nlohmann::json doc, const RunConfig &cfg);

/// Output directory, re-rooted under $TECTUM_OUTPUT_ROOT when that is set and
/// the configured directory is relative.
std::filesystem::path output_directory(const RunConfig &cfg);

void write_text(const std::filesystem::path &path, const std::string &text);
void write_json(const std::filesystem::path &path, const nlohmann::json &doc);

Circuit build_circuit(const RunConfig &cfg);
GroupConfig build_groups(const RunConfig &cfg, const Circuit &c);
/// Sweep list with "all" expanded to every defined group.
std::vector<std::string> sweep_groups(const RunConfig &cfg, const GroupConfig &gc);

nlohmann::json cmd_stats(const RunConfig &cfg);

/// Feasibility reports for the named pathways. `trace` receives the CSV
/// activity trace of every run when given.
nlohmann::json cmd_simulate(const RunConfig &cfg, const std::vector<std::string> &pathways,
                            std::ostream *trace = nullptr);

struct TrainOutput {
    SNNModel model;
    nlohmann::json checkpoint;
    nlohmann::json summary; // history plus initial and final held-out metrics
    std::string history_svg;
};

TrainOutput cmd_train(const RunConfig &cfg);

/// Held-out metrics of a trained model on the test split its config defines,
/// plus free-running metrics when `rollout_teacher_steps` is set.
nlohmann::json cmd_eval(const RunConfig &cfg, const SNNModel &m, const TrainConfig &model_cfg,
                        std::optional<std::size_t> rollout_teacher_steps = {});

struct AblateOutput {
    nlohmann::json report;
    std::string markdown;
    std::string svg;
};

AblateOutput cmd_ablate(const RunConfig &cfg, const SNNModel &m, const TrainConfig &model_cfg);

struct ScoresOutput {
    nlohmann::json doc;
    std::string svg;
};

/// Per-model scores, or a single model when `model` is set.
ScoresOutput cmd_scores(const RunConfig &cfg, const AccuracyTable &t, const std::optional<std::string> &model = {});

/// Combined JSON and Markdown report assembled from the stage documents found
/// in `dir`. Throws DataError if none are present.
std::pair<nlohmann::json, std::string> cmd_report(const RunConfig &cfg, const std::filesystem::path &dir);

/// build -> feasibility -> train -> sweep -> report, persisting each stage's
/// output as it completes. A failing stage stops the run; its error keeps its
/// kind and names the stage.
nlohmann::json cmd_pipeline(const RunConfig &cfg);

} // namespace tectum
