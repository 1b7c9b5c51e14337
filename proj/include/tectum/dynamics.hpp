#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tectum/circuit.hpp"
#include "tectum/groups.hpp"

namespace tectum {

using State3 = std::array<double, 3>;

struct LorenzParams {
    double sigma = 10.0;
    double rho = 28.0;
    double beta = 8.0 / 3.0;
    double dt = 0.01;
    std::size_t steps = 1000;
    State3 init{1.0, 1.0, 1.0};
};

/// Time derivative of the Lorenz system at `s`.
State3 lorenz_rhs(const State3 &s, const LorenzParams &p);

/// Fixed-step classical RK4. Returns steps+1 states starting with p.init.
/// Throws NumericError naming the step if the state stops being finite.
std::vector<State3> lorenz_trajectory(const LorenzParams &p);

// Dimensionless defaults with the network step dt = 1.
struct LIFParams {
    double tau_m = 20.0;
    double v_rest = 0.0;
    double r_m = 1.0;
    double v_th = 1.0;
    double v_reset = 0.0;
    double dt = 1.0;

    void validate() const;
};

struct SynapseParams {
    double tau_s = 5.0;
    double dt = 1.0;

    void validate() const;
};

struct NetworkState {
    Vector v;
    Vector i_syn;
    Vector spikes; // 0 or 1 per node

    static NetworkState at_rest(std::size_t n, const LIFParams &p);
};

/// Exponential-Euler membrane update with constant input over the step,
/// followed by the threshold test and reset. `i_syn` is carried over.
NetworkState lif_step(const NetworkState &state, const Vector &input_current, const LIFParams &p);

/// I <- I * exp(-dt/tau_s) + W * S, where W(i, j) weights source j onto target i.
Vector synapse_step(const Vector &i_syn, const Vector &spikes, const Matrix &weights, const SynapseParams &p);

/// Per-node sign of outgoing weights: -1 for "i_"-prefixed (inhibitory)
/// categories, +1 otherwise.
Vector node_signs(const std::vector<std::string> &names);

/// W(i, j) = gain * sign(j) * A(i, j).
Matrix signed_weights(const Circuit &c, double gain = 1.0);

enum class ActivityMode { spikes, current };

struct PropagationParams {
    double pulse_amplitude = 8.0; // injected current per source node
    std::size_t pulse_steps = 50;
    std::size_t window = 200;
    double weight_gain = 3.0; // same fixed coupling as the SNN default
    ActivityMode mode = ActivityMode::spikes;
    LIFParams lif;
    SynapseParams syn;
};

struct FeasibilityReport {
    std::string pathway;
    std::string source_group;
    std::string target_group;
    double target_activity = 0.0; // total target spikes, or peak target current
    std::size_t target_spikes = 0;
    double peak_target_current = 0.0;
    std::optional<std::size_t> first_target_spike_step;
    bool propagated = false;
    ActivityMode mode = ActivityMode::spikes;
};

nlohmann::json to_json(const FeasibilityReport &r);

/// Optional per-step, per-node trace sink: step,node,V,I,spike.
struct TraceWriter {
    std::ostream *out = nullptr;
    const std::vector<std::string> *names = nullptr;
};

/// Activity threshold for "propagated" when running in current mode.
inline constexpr double kCurrentActivityThreshold = 1e-6;

/// Runs the coupled LIF/synapse network from rest, driving the source group
/// with a current pulse, and reports activity reaching the target group.
FeasibilityReport propagation_check(const Circuit &c, const GroupConfig &gc, const std::string &source,
                                    const std::string &target, const PropagationParams &p,
                                    const std::string &pathway_name = "", TraceWriter trace = {});

} // namespace tectum
