#include "tectum/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "tectum/errors.hpp"

namespace tectum {

using nlohmann::json;

State3 lorenz_rhs(const State3 &s, const LorenzParams &p)
{
    const auto [x, y, z] = s;
    return {p.sigma * (y - x), x * (p.rho - z) - y, x * y - p.beta * z};
}

std::vector<State3> lorenz_trajectory(const LorenzParams &p)
{
    if (!(p.dt > 0.0)) throw ConfigError("Lorenz dt must be positive");
    if (p.steps < 1) throw ConfigError("Lorenz steps must be at least 1");

    auto axpy = [](const State3 &a, double h, const State3 &k) {
        return State3{a[0] + h * k[0], a[1] + h * k[1], a[2] + h * k[2]};
    };

    std::vector<State3> out;
    out.reserve(p.steps + 1);
    out.push_back(p.init);
    State3 s = p.init;
    const double h = p.dt;
    for (std::size_t step = 1; step <= p.steps; ++step) {
        const State3 k1 = lorenz_rhs(s, p);
        const State3 k2 = lorenz_rhs(axpy(s, 0.5 * h, k1), p);
        const State3 k3 = lorenz_rhs(axpy(s, 0.5 * h, k2), p);
        const State3 k4 = lorenz_rhs(axpy(s, h, k3), p);
        for (int d = 0; d < 3; ++d) s[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
        if (!std::isfinite(s[0]) || !std::isfinite(s[1]) || !std::isfinite(s[2])) {
            throw NumericError("Lorenz state became non-finite at step " + std::to_string(step));
        }
        out.push_back(s);
    }
    return out;
}

void LIFParams::validate() const
{
    if (!(tau_m > 0.0)) throw ConfigError("tau_m must be positive");
    if (!(v_th > v_rest)) throw ConfigError("v_th must exceed v_rest");
    if (!(dt > 0.0)) throw ConfigError("LIF dt must be positive");
}

void SynapseParams::validate() const
{
    if (!(tau_s > 0.0)) throw ConfigError("tau_s must be positive");
    if (!(dt > 0.0)) throw ConfigError("synapse dt must be positive");
}

NetworkState NetworkState::at_rest(std::size_t n, const LIFParams &p)
{
    const auto k = static_cast<Eigen::Index>(n);
    return {Vector::Constant(k, p.v_rest), Vector::Zero(k), Vector::Zero(k)};
}

NetworkState lif_step(const NetworkState &state, const Vector &input_current, const LIFParams &p)
{
    const double decay = std::exp(-p.dt / p.tau_m);
    NetworkState next;
    next.i_syn = state.i_syn;
    const Vector target = (p.v_rest + p.r_m * input_current.array()).matrix();
    next.v = target + (state.v - target) * decay;
    next.spikes = (next.v.array() >= p.v_th).cast<double>().matrix();
    for (Eigen::Index k = 0; k < next.v.size(); ++k) {
        if (next.spikes[k] != 0.0) next.v[k] = p.v_reset;
    }
    return next;
}

Vector synapse_step(const Vector &i_syn, const Vector &spikes, const Matrix &weights, const SynapseParams &p)
{
    return i_syn * std::exp(-p.dt / p.tau_s) + weights * spikes;
}

Vector node_signs(const std::vector<std::string> &names)
{
    Vector s(static_cast<Eigen::Index>(names.size()));
    for (std::size_t k = 0; k < names.size(); ++k) s[static_cast<Eigen::Index>(k)] = names[k].starts_with("i_") ? -1.0 : 1.0;
    return s;
}

Matrix signed_weights(const Circuit &c, double gain)
{
    return gain * c.matrix() * node_signs(c.node_names()).asDiagonal();
}

json to_json(const FeasibilityReport &r)
{
    json j{{"pathway", r.pathway},
           {"source_group", r.source_group},
           {"target_group", r.target_group},
           {"target_activity", r.target_activity},
           {"target_spikes", r.target_spikes},
           {"peak_target_current", r.peak_target_current},
           {"mode", r.mode == ActivityMode::spikes ? "spikes" : "current"},
           {"propagated", r.propagated}};
    j["first_target_spike_step"] = r.first_target_spike_step ? json(*r.first_target_spike_step) : json(nullptr);
    return j;
}

FeasibilityReport propagation_check(const Circuit &c, const GroupConfig &gc, const std::string &source,
                                    const std::string &target, const PropagationParams &p,
                                    const std::string &pathway_name, TraceWriter trace)
{
    p.lif.validate();
    p.syn.validate();
    if (gc.port(source) != PortKind::input) {
        throw ConfigError("propagation source '" + source + "' is not an input-port group");
    }
    const auto &src_nodes = gc.resolve(source);
    const auto &dst_nodes = gc.resolve(target);

    const auto n = static_cast<Eigen::Index>(c.size());
    Vector drive = Vector::Zero(n);
    for (const auto &name : src_nodes) drive[static_cast<Eigen::Index>(c.require_index(name))] = p.pulse_amplitude;
    std::vector<Eigen::Index> dst;
    for (const auto &name : dst_nodes) dst.push_back(static_cast<Eigen::Index>(c.require_index(name)));

    const Matrix w = signed_weights(c, p.weight_gain);
    FeasibilityReport rep;
    rep.pathway = pathway_name;
    rep.source_group = source;
    rep.target_group = target;
    rep.mode = p.mode;

    NetworkState st = NetworkState::at_rest(c.size(), p.lif);
    const Vector zero = Vector::Zero(n);
    for (std::size_t step = 0; step < p.window; ++step) {
        const Vector &ext = step < p.pulse_steps ? drive : zero;
        st = lif_step(st, st.i_syn + ext, p.lif);
        st.i_syn = synapse_step(st.i_syn, st.spikes, w, p.syn);
        if (!st.v.allFinite() || !st.i_syn.allFinite()) {
            throw NumericError("network state became non-finite at step " + std::to_string(step));
        }
        for (auto k : dst) {
            if (st.spikes[k] != 0.0) {
                ++rep.target_spikes;
                if (!rep.first_target_spike_step) rep.first_target_spike_step = step;
            }
            rep.peak_target_current = std::max(rep.peak_target_current, std::abs(st.i_syn[k]));
        }
        if (trace.out != nullptr) {
            for (Eigen::Index k = 0; k < n; ++k) {
                *trace.out << step << ',' << (*trace.names)[static_cast<std::size_t>(k)] << ',' << st.v[k] << ','
                           << st.i_syn[k] << ',' << static_cast<int>(st.spikes[k]) << '\n';
            }
        }
    }

    if (p.mode == ActivityMode::spikes) {
        rep.target_activity = static_cast<double>(rep.target_spikes);
        rep.propagated = rep.target_spikes > 0;
    } else {
        rep.target_activity = rep.peak_target_current;
        rep.propagated = rep.peak_target_current > kCurrentActivityThreshold;
    }
    return rep;
}

} // namespace tectum
