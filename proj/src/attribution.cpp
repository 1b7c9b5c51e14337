#include "tectum/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <iomanip>
#include <sstream>

#include "tectum/errors.hpp"

namespace tectum {

using nlohmann::json;

double percent_change(double after, double before)
{
    if (before == 0.0) throw NumericError("relative change against a zero baseline");
    return (after - before) / before * 100.0;
}

double esi(double delta_spike_pct, double delta_mse_pct, double epsilon)
{
    return delta_spike_pct / (std::abs(delta_mse_pct) + epsilon);
}

double rsi(double mse_after, double mse_baseline)
{
    if (!(mse_baseline > 0.0)) throw DataError("RSI needs a positive baseline MSE");
    return (mse_after - mse_baseline) / mse_baseline;
}

AblationRecord make_record(std::string group, std::size_t nodes, double mse_before, double mse_after,
                           double spikes_before, double spikes_after, bool is_input_port, double epsilon)
{
    AblationRecord r;
    r.group = std::move(group);
    r.nodes = nodes;
    r.mse_before = mse_before;
    r.mse_after = mse_after;
    r.spikes_before = spikes_before;
    r.spikes_after = spikes_after;
    r.is_input_port = is_input_port;
    r.delta_mse = mse_after - mse_before;
    r.delta_mse_pct = percent_change(mse_after, mse_before);
    r.delta_spike_pct = percent_change(spikes_after, spikes_before);
    r.esi = esi(r.delta_spike_pct, r.delta_mse_pct, epsilon);
    r.rsi = rsi(mse_after, mse_before);
    return r;
}

void check_record(const AblationRecord &r, double epsilon)
{
    const auto again = make_record(r.group, r.nodes, r.mse_before, r.mse_after, r.spikes_before, r.spikes_after,
                                   r.is_input_port, epsilon);
    if (again.delta_mse != r.delta_mse || again.delta_mse_pct != r.delta_mse_pct ||
        again.delta_spike_pct != r.delta_spike_pct || again.esi != r.esi || again.rsi != r.rsi) {
        throw NumericError("ablation record for '" + r.group + "' is not self-consistent");
    }
}

json to_json(const AblationRecord &r)
{
    return json{{"group", r.group},
                {"nodes", r.nodes},
                {"mse_before", r.mse_before},
                {"mse_after", r.mse_after},
                {"spikes_before", r.spikes_before},
                {"spikes_after", r.spikes_after},
                {"delta_mse", r.delta_mse},
                {"delta_mse_pct", r.delta_mse_pct},
                {"delta_spike_pct", r.delta_spike_pct},
                {"esi", r.esi},
                {"esi_x100", 100.0 * r.esi},
                {"rsi", r.rsi},
                {"is_input_port", r.is_input_port}};
}

AblationRecord record_from_json(const json &j)
{
    try {
        AblationRecord r;
        r.group = j.at("group").get<std::string>();
        r.nodes = j.at("nodes").get<std::size_t>();
        r.mse_before = j.at("mse_before").get<double>();
        r.mse_after = j.at("mse_after").get<double>();
        r.spikes_before = j.at("spikes_before").get<double>();
        r.spikes_after = j.at("spikes_after").get<double>();
        r.delta_mse = j.at("delta_mse").get<double>();
        r.delta_mse_pct = j.at("delta_mse_pct").get<double>();
        r.delta_spike_pct = j.at("delta_spike_pct").get<double>();
        r.esi = j.at("esi").get<double>();
        r.rsi = j.at("rsi").get<double>();
        r.is_input_port = j.at("is_input_port").get<bool>();
        return r;
    } catch (const json::exception &e) {
        throw DataError(std::string("malformed ablation record: ") + e.what());
    }
}

namespace {

// Re-throws `e` with the failing group prefixed, keeping the error kind.
[[noreturn]] void rethrow_with_group(const std::string &group, std::exception_ptr e)
{
    try {
        std::rethrow_exception(e);
    } catch (const NumericError &err) {
        throw NumericError("ablation of '" + group + "': " + err.what());
    } catch (const DataError &err) {
        throw DataError("ablation of '" + group + "': " + err.what());
    } catch (const ConfigError &err) {
        throw ConfigError("ablation of '" + group + "': " + err.what());
    }
}

} // namespace

std::vector<AblationRecord> run_ablation_sweep(const SNNModel &m, const GroupConfig &gc,
                                               std::span<const LorenzWindow> windows,
                                               const std::vector<std::string> &groups, double epsilon,
                                               const EvalMetrics &baseline)
{
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    // Resolve everything up front so a bad name fails before any work starts.
    for (const auto &g : groups) {
        try {
            for (const auto &node : gc.resolve(g)) m.circuit.require_index(node);
        } catch (...) {
            rethrow_with_group(g, std::current_exception());
        }
    }

    std::vector<std::future<EvalMetrics>> jobs;
    jobs.reserve(groups.size());
    for (const auto &g : groups) {
        const NodeSet &nodes = gc.resolve(g);
        jobs.push_back(std::async(std::launch::async, [&m, &nodes, windows] {
            return evaluate(with_ablation(m, nodes), windows);
        }));
    }

    std::vector<AblationRecord> out;
    out.reserve(groups.size());
    for (std::size_t k = 0; k < groups.size(); ++k) {
        try {
            const EvalMetrics after = jobs[k].get();
            auto rec = make_record(groups[k], gc.resolve(groups[k]).size(), baseline.mse, after.mse,
                                   baseline.spikes_per_sample, after.spikes_per_sample,
                                   gc.port(groups[k]) == PortKind::input, epsilon);
            check_record(rec, epsilon);
            out.push_back(std::move(rec));
        } catch (...) {
            // Drain the remaining futures before leaving.
            for (std::size_t rest = k + 1; rest < jobs.size(); ++rest) {
                try {
                    jobs[rest].get();
                } catch (...) {
                }
            }
            rethrow_with_group(groups[k], std::current_exception());
        }
    }
    return out;
}

std::vector<AblationRecord> run_ablation_sweep(const SNNModel &m, const GroupConfig &gc,
                                               std::span<const LorenzWindow> windows,
                                               const std::vector<std::string> &groups, double epsilon)
{
    return run_ablation_sweep(m, gc, windows, groups, epsilon, evaluate(m, windows));
}

std::vector<AblationRecord> rank_esi(std::span<const AblationRecord> records, bool exclude_input_ports)
{
    std::vector<AblationRecord> out;
    for (const auto &r : records) {
        if (r.delta_mse > 0.0 && !(exclude_input_ports && r.is_input_port)) out.push_back(r);
    }
    std::stable_sort(out.begin(), out.end(), [](const AblationRecord &a, const AblationRecord &b) {
        const double x = std::abs(a.esi), y = std::abs(b.esi);
        if (x != y) return x < y;
        return a.group < b.group;
    });
    return out;
}

std::vector<AblationRecord> rank_rsi(std::span<const AblationRecord> records)
{
    std::vector<AblationRecord> out(records.begin(), records.end());
    std::stable_sort(out.begin(), out.end(), [](const AblationRecord &a, const AblationRecord &b) {
        if (a.rsi != b.rsi) return a.rsi > b.rsi;
        return a.group < b.group;
    });
    return out;
}

DualAxisReport dual_axis_report(std::span<const AblationRecord> records, const GroupConfig &gc)
{
    if (records.empty()) throw DataError("dual-axis report needs at least one ablation record");
    DualAxisReport rep;
    rep.records.assign(records.begin(), records.end());
    rep.esi_ranking = rank_esi(records, false);
    rep.esi_internal = rank_esi(records, true);
    rep.rsi_ranking = rank_rsi(records);
    for (const auto &r : records) {
        if (r.delta_mse <= 0.0) rep.error_decreasing.push_back(r);
    }
    std::sort(rep.error_decreasing.begin(), rep.error_decreasing.end(),
              [](const AblationRecord &a, const AblationRecord &b) { return a.group < b.group; });

    auto node_count = [&gc](const AblationRecord &r) {
        return gc.contains(r.group) ? gc.resolve(r.group).size() : r.nodes;
    };
    if (!rep.esi_internal.empty()) {
        const auto &top = rep.esi_internal.front();
        rep.top_energy = AxisCandidate{top.group, node_count(top), "100xESI", 100.0 * top.esi};
    } else if (rep.esi_ranking.empty()) {
        rep.energy_note = "no ablation increased the prediction error; the energy axis is empty";
    } else {
        rep.energy_note = "only input-port ablations increased the prediction error; no internal energy candidate";
    }
    const auto &top = rep.rsi_ranking.front();
    rep.top_robustness = AxisCandidate{top.group, node_count(top), "RSI", top.rsi};
    return rep;
}

namespace {

json records_json(const std::vector<AblationRecord> &rs)
{
    json a = json::array();
    for (const auto &r : rs) a.push_back(to_json(r));
    return a;
}

json candidate_json(const std::optional<AxisCandidate> &c)
{
    if (!c) return nullptr;
    return json{{"group", c->group}, {"nodes", c->nodes}, {"index", c->index_name}, {"value", c->index_value}};
}

} // namespace

json to_json(const DualAxisReport &r)
{
    json j{{"esi_ranking", records_json(r.esi_ranking)},
           {"esi_ranking_internal", records_json(r.esi_internal)},
           {"rsi_ranking", records_json(r.rsi_ranking)},
           {"error_decreasing", records_json(r.error_decreasing)},
           {"top_energy", candidate_json(r.top_energy)},
           {"top_robustness", candidate_json(r.top_robustness)},
           {"energy_axis_empty", !r.top_energy.has_value()},
           {"records", records_json(r.records)}};
    if (!r.energy_note.empty()) j["energy_note"] = r.energy_note;
    return j;
}

std::string to_markdown(const DualAxisReport &r)
{
    std::ostringstream os;
    os << std::fixed;
    os << "# Dual-axis ablation report\n\n";
    os << "| Axis | Substructure | Nodes | Evidence |\n|---|---|---|---|\n";
    if (r.top_energy) {
        os << "| Energy | " << r.top_energy->group << " | " << r.top_energy->nodes << " | 100xESI = " << std::setprecision(2)
           << r.top_energy->index_value << " |\n";
    } else {
        os << "| Energy | - | - | " << r.energy_note << " |\n";
    }
    if (r.top_robustness) {
        os << "| Robustness | " << r.top_robustness->group << " | " << r.top_robustness->nodes
           << " | RSI = " << std::setprecision(4) << r.top_robustness->index_value << " |\n";
    }

    os << "\n## ESI ranking (error-increasing ablations, ascending |ESI|)\n\n";
    os << "| Substructure | Input port | 100xESI | dSpike% | dMSE% |\n|---|---|---|---|---|\n";
    for (const auto &x : r.esi_ranking) {
        os << "| " << x.group << " | " << (x.is_input_port ? "yes" : "no") << " | " << std::setprecision(2)
           << 100.0 * x.esi << " | " << x.delta_spike_pct << " | " << x.delta_mse_pct << " |\n";
    }

    os << "\n## RSI ranking\n\n| Substructure | RSI | MSE after |\n|---|---|---|\n";
    for (const auto &x : r.rsi_ranking) {
        os << "| " << x.group << " | " << std::setprecision(4) << x.rsi << " | " << x.mse_after << " |\n";
    }

    if (!r.error_decreasing.empty()) {
        os << "\n## Error-decreasing ablations (not ranked)\n\n| Substructure | dMSE | dSpike% |\n|---|---|---|\n";
        for (const auto &x : r.error_decreasing) {
            os << "| " << x.group << " | " << std::setprecision(4) << x.delta_mse << " | " << std::setprecision(2)
               << x.delta_spike_pct << " |\n";
        }
    }
    return os.str();
}

} // namespace tectum
