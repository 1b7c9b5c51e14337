#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "tectum/circuit.hpp"
#include "tectum/dynamics.hpp"
#include "tectum/groups.hpp"

namespace tectum {

using Series = Eigen::Matrix<double, Eigen::Dynamic, 3>;

struct TrainConfig {
    std::size_t epochs = 60;
    std::size_t horizon = 100;
    double lr = 1e-3;
    std::uint64_t seed = 42;
    std::size_t train_windows = 48;
    std::size_t val_windows = 8;
    std::size_t test_windows = 16;
    std::size_t batch_size = 8;
    double grad_clip = 5.0; // global-norm clip, 0 disables
    std::size_t transient_steps = 1000;
    LorenzParams lorenz;
    LIFParams lif;
    SynapseParams syn;
    double coupling = 3.0;      // fixed multiplier from probabilities to synaptic weights
    double input_gain = 4.0;    // fixed multiplier on encoder currents
    double tonic_current = 2.5; // constant drive into every live node
    std::string input_group = "RGC_input";
    std::string output_group = "TPN_output";

    void validate() const;
};

nlohmann::json to_json(const TrainConfig &cfg);
TrainConfig train_config_from_json(const nlohmann::json &j, TrainConfig base = {});

/// One teacher-forced sample: inputs[t] is the state at t, targets[t] the state at t+1.
struct LorenzWindow {
    Series inputs;
    Series targets;
};

struct LorenzDataset {
    std::vector<LorenzWindow> train;
    std::vector<LorenzWindow> validation;
    std::vector<LorenzWindow> test;
    State3 mean{};
    State3 stddev{};
};

/// Single long Lorenz run, transient discarded, cut into non-overlapping
/// horizon-length windows, z-scored with training-split statistics and split
/// after a seeded shuffle.
LorenzDataset make_lorenz_dataset(const TrainConfig &cfg);

/**
 * LIF network bound to a fixed circuit topology.
 *
 * Recurrent weights are coupling * sign(j) * A(i, j) * exp(log_gain(i, j)); only the
 * gains are trained, so zero entries and edge signs can never change. The
 * encoder drives the input nodes with an affine map of the 3-d state and the
 * readout maps exponentially filtered spikes of the output nodes to the next
 * state.
 */
struct SNNModel {
    Circuit circuit;
    Vector signs;
    std::vector<std::size_t> input_nodes;
    std::vector<std::size_t> output_nodes;
    Matrix encoder_w; // |input| x 3
    Vector encoder_b; // |input|
    Matrix readout_w; // 3 x |output|
    Vector readout_b; // 3
    Matrix log_gain;  // N x N, zero off the topology
    Vector active;    // 1 for live nodes, 0 for ablated ones
    double coupling = 1.0;
    double input_gain = 1.0;
    double tonic_current = 0.0;
    LIFParams lif;
    SynapseParams syn;
    std::uint64_t seed = 0;

    Matrix recurrent_weights() const;
    std::size_t size() const { return circuit.size(); }
};

/// Throws ConfigError if the input or output group is missing or not flagged
/// with the matching port.
SNNModel build_model(const Circuit &c, const GroupConfig &gc, const TrainConfig &cfg);

/// Copy of `m` with `nodes` disabled: their rows/columns are removed from the
/// circuit and they can neither receive drive nor spike.
SNNModel with_ablation(const SNNModel &m, const NodeSet &nodes);

struct ForwardResult {
    Series prediction;
    Matrix spikes; // horizon x N, 0/1
    double total_spikes = 0.0;
};

/// Teacher-forced run from rest over `inputs` (one row per step).
ForwardResult forward(const SNNModel &m, const Series &inputs);

/// Free-running run: the first `teacher_steps` inputs come from `inputs`, after
/// which each step is fed the previous prediction.
ForwardResult rollout(const SNNModel &m, const Series &inputs, std::size_t teacher_steps);

/// Spike nonlinearity used by the gradient engine. `hard` is the threshold
/// rule with a unit-width rectangular surrogate derivative; `smooth` replaces
/// both the forward and backward pass with a logistic of the given width.
struct SpikeFunction {
    enum class Kind { hard, smooth } kind = Kind::hard;
    double width = 1.0;
};

struct Gradients {
    Matrix encoder_w;
    Vector encoder_b;
    Matrix readout_w;
    Vector readout_b;
    Matrix log_gain;
};

/// Mean-squared one-step-ahead loss over `windows` and its gradient by
/// backpropagation through time.
std::pair<double, Gradients> loss_and_gradient(const SNNModel &m, std::span<const LorenzWindow> windows,
                                               SpikeFunction fn = {});

/// Loss only, evaluated with the same spike function.
double loss(const SNNModel &m, std::span<const LorenzWindow> windows, SpikeFunction fn = {});

struct EpochRecord {
    std::size_t epoch = 0;
    double train_mse = 0.0;
    double val_mse = 0.0;
};

struct TrainResult {
    SNNModel model;
    std::vector<EpochRecord> history;
    double initial_train_mse = 0.0;
};

/// Adam on encoder, readout and log-gains. Zero epochs returns the model
/// untouched. Throws NumericError with the epoch on a non-finite loss.
TrainResult train(const SNNModel &m, const LorenzDataset &data, const TrainConfig &cfg);

struct EvalMetrics {
    double mse = 0.0;
    std::optional<double> r2;   // empty when the targets have zero variance
    std::optional<double> corr; // empty when either side has zero variance
    double spikes_per_sample = 0.0;
};

nlohmann::json to_json(const EvalMetrics &e);

/// Pooled metrics over every sample, step and dimension. Throws DataError on
/// an empty dataset.
EvalMetrics evaluate(const SNNModel &m, std::span<const LorenzWindow> windows);

/// Same metrics for free-running predictions after `teacher_steps` forced steps.
EvalMetrics evaluate_rollout(const SNNModel &m, std::span<const LorenzWindow> windows, std::size_t teacher_steps);

/// Metrics for given predictions/targets, shared with evaluate().
EvalMetrics score_predictions(std::span<const Series> predictions, std::span<const Series> targets,
                              double total_spikes);

nlohmann::json model_to_json(const SNNModel &m, const TrainConfig &cfg);
SNNModel model_from_json(const nlohmann::json &doc, TrainConfig *cfg_out = nullptr);
void save_model(const SNNModel &m, const TrainConfig &cfg, const std::filesystem::path &path);
SNNModel load_model(const std::filesystem::path &path, TrainConfig *cfg_out = nullptr);

} // namespace tectum
