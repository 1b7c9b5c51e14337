#include "tectum/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "tectum/errors.hpp"
#include "tectum/svg.hpp"

namespace tectum {

using nlohmann::json;
namespace fs = std::filesystem;

const std::vector<std::string> &default_sweep_groups()
{
    static const std::vector<std::string> g = {"RGC_input",       "ns_TIN",   "S12_group", "TPN_output",
                                               "superficial_TIN", "deep_TIN", "SGC_group"};
    return g;
}

void RunConfig::validate() const
{
    if (matrix_path.has_value() == synthesis.has_value()) {
        throw ConfigError("config needs exactly one of a matrix path and a synthesis spec");
    }
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (ablation_groups.empty()) throw ConfigError("ablation group list is empty");
    if (propagation.window == 0) throw ConfigError("propagation window must be at least one step");
    for (const auto &p : pathways) find_pathway(p);
    train.validate();
}

void RunConfig::apply_seed(std::uint64_t s)
{
    seed = s;
    train.seed = s;
    if (synthesis) synthesis->seed = s;
}

namespace {

std::string rescale_name(RescaleMode m) { return m == RescaleMode::multiplicative ? "multiplicative" : "range_preserving"; }

RescaleMode rescale_from_string(const std::string &s)
{
    if (s == "multiplicative") return RescaleMode::multiplicative;
    if (s == "range_preserving") return RescaleMode::range_preserving;
    throw ConfigError("unknown rescale mode '" + s + "'");
}

ActivityMode activity_from_string(const std::string &s)
{
    if (s == "spikes") return ActivityMode::spikes;
    if (s == "current") return ActivityMode::current;
    throw ConfigError("unknown activity mode '" + s + "' (expected spikes or current)");
}

fs::path resolve(const fs::path &base, const std::string &p)
{
    const fs::path path(p);
    if (path.is_absolute() || base.empty()) return path.lexically_normal();
    return (base / path).lexically_normal();
}

SynthesisSpec synthesis_from_json(const json &j)
{
    const std::size_t n = j.value("n", default_node_names().size());
    SynthesisSpec s = n == default_node_names().size() ? default_synthesis_spec() : SynthesisSpec{};
    s.n = n;
    s.nonzero_edges = j.value("nonzero_edges", s.nonzero_edges);
    s.prob_low = j.value("prob_low", s.prob_low);
    s.prob_high = j.value("prob_high", s.prob_high);
    s.target_spectral_radius = j.value("target_spectral_radius", s.target_spectral_radius);
    s.rescale = rescale_from_string(j.value("rescale", rescale_name(s.rescale)));
    return s;
}

} // namespace

RunConfig run_config_from_json(const json &j, const fs::path &base_dir)
{
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    RunConfig cfg;
    try {
        if (j.contains("circuit")) {
            const auto &c = j.at("circuit");
            if (c.contains("matrix") && c.contains("synthesize")) {
                throw ConfigError("circuit section sets both 'matrix' and 'synthesize'");
            }
            if (c.contains("matrix")) cfg.matrix_path = resolve(base_dir, c.at("matrix").get<std::string>());
            if (c.contains("synthesize")) cfg.synthesis = synthesis_from_json(c.at("synthesize"));
        }
        if (j.contains("groups")) cfg.groups_path = resolve(base_dir, j.at("groups").get<std::string>());
        if (j.contains("propagation")) {
            const auto &p = j.at("propagation");
            cfg.propagation.pulse_amplitude = p.value("pulse_amplitude", cfg.propagation.pulse_amplitude);
            cfg.propagation.pulse_steps = p.value("pulse_steps", cfg.propagation.pulse_steps);
            cfg.propagation.window = p.value("window", cfg.propagation.window);
            cfg.propagation.weight_gain = p.value("weight_gain", cfg.propagation.weight_gain);
            if (p.contains("mode")) cfg.propagation.mode = activity_from_string(p.at("mode").get<std::string>());
            if (p.contains("pathways")) cfg.pathways = p.at("pathways").get<std::vector<std::string>>();
        }
        if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"), cfg.train);
        if (j.contains("ablation")) {
            const auto &a = j.at("ablation");
            if (a.contains("groups")) {
                const auto &g = a.at("groups");
                cfg.ablation_groups =
                    g.is_string() ? std::vector<std::string>{g.get<std::string>()} : g.get<std::vector<std::string>>();
            }
            cfg.epsilon = a.value("epsilon", cfg.epsilon);
        }
        if (j.contains("transfer")) {
            const auto &t = j.at("transfer");
            if (t.contains("budget")) cfg.budget_table = resolve(base_dir, t.at("budget").get<std::string>());
            if (t.contains("noise")) cfg.noise_table = resolve(base_dir, t.at("noise").get<std::string>());
        }
        if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
        cfg.apply_seed(j.value("seed", cfg.seed));
    } catch (const json::exception &e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    cfg.propagation.lif = cfg.train.lif;
    cfg.propagation.syn = cfg.train.syn;
    return cfg;
}

json run_config_to_json(const RunConfig &cfg)
{
    json circuit;
    if (cfg.matrix_path) circuit["matrix"] = cfg.matrix_path->generic_string();
    if (cfg.synthesis) {
        const auto &s = *cfg.synthesis;
        circuit["synthesize"] = {{"n", s.n},
                                 {"nonzero_edges", s.nonzero_edges},
                                 {"prob_low", s.prob_low},
                                 {"prob_high", s.prob_high},
                                 {"target_spectral_radius", s.target_spectral_radius},
                                 {"rescale", rescale_name(s.rescale)}};
    }
    json j{{"seed", cfg.seed},
           {"circuit", circuit},
           {"propagation",
            {{"pulse_amplitude", cfg.propagation.pulse_amplitude},
             {"pulse_steps", cfg.propagation.pulse_steps},
             {"window", cfg.propagation.window},
             {"weight_gain", cfg.propagation.weight_gain},
             {"mode", cfg.propagation.mode == ActivityMode::spikes ? "spikes" : "current"},
             {"pathways", cfg.pathways}}},
           {"train", to_json(cfg.train)},
           {"ablation", {{"groups", cfg.ablation_groups}, {"epsilon", cfg.epsilon}}}};
    if (cfg.groups_path) j["groups"] = cfg.groups_path->generic_string();
    json transfer = json::object();
    if (cfg.budget_table) transfer["budget"] = cfg.budget_table->generic_string();
    if (cfg.noise_table) transfer["noise"] = cfg.noise_table->generic_string();
    if (!transfer.empty()) j["transfer"] = transfer;
    return j;
}

RunConfig load_run_config(const fs::path &path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("file not found: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception &e) {
        throw ConfigError("cannot parse " + path.string() + ": " + e.what());
    }
    return run_config_from_json(j, path.parent_path());
}

std::string config_hash(const RunConfig &cfg)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : run_config_to_json(cfg).dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json stamp(json doc, const RunConfig &cfg)
{
    doc["seed"] = cfg.seed;
    doc["config_hash"] = config_hash(cfg);
    return doc;
}

fs::path output_directory(const RunConfig &cfg)
{
    const char *root = std::getenv("TECTUM_OUTPUT_ROOT");
    if (root != nullptr && *root != '\0' && cfg.output_dir.is_relative()) return fs::path(root) / cfg.output_dir;
    return cfg.output_dir;
}

void write_text(const fs::path &path, const std::string &text)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw DataError("cannot write " + path.string());
}

void write_json(const fs::path &path, const json &doc) { write_text(path, doc.dump(2) + "\n"); }

Circuit build_circuit(const RunConfig &cfg)
{
    if (cfg.matrix_path) return load_circuit(*cfg.matrix_path);
    if (cfg.synthesis) return synthesize_circuit(*cfg.synthesis);
    throw ConfigError("config needs exactly one of a matrix path and a synthesis spec");
}

GroupConfig build_groups(const RunConfig &cfg, const Circuit &c)
{
    GroupConfig gc = cfg.groups_path ? load_groups(*cfg.groups_path) : default_groups();
    gc.validate_against(c);
    return gc;
}

std::vector<std::string> sweep_groups(const RunConfig &cfg, const GroupConfig &gc)
{
    if (cfg.ablation_groups.size() == 1 && cfg.ablation_groups.front() == "all") return gc.names();
    return cfg.ablation_groups;
}

json cmd_stats(const RunConfig &cfg)
{
    const Circuit c = build_circuit(cfg);
    json doc = to_json(graph_stats(c));
    json meta = json::object();
    for (const auto &[k, v] : c.metadata()) meta[k] = v;
    return stamp(json{{"stats", doc}, {"circuit_metadata", meta}}, cfg);
}

json cmd_simulate(const RunConfig &cfg, const std::vector<std::string> &pathways, std::ostream *trace)
{
    const Circuit c = build_circuit(cfg);
    const GroupConfig gc = build_groups(cfg, c);
    if (trace != nullptr) *trace << "pathway,step,node,V,I,spike\n";
    json reports = json::array();
    for (const auto &name : pathways) {
        const Pathway &p = find_pathway(name);
        std::ostringstream rows;
        TraceWriter tw;
        if (trace != nullptr) tw = TraceWriter{&rows, &c.node_names()};
        reports.push_back(to_json(propagation_check(c, gc, p.source, p.target, cfg.propagation, p.name, tw)));
        if (trace != nullptr) {
            std::istringstream in(rows.str());
            std::string line;
            while (std::getline(in, line)) *trace << p.name << ',' << line << '\n';
        }
    }
    return stamp(json{{"feasibility", reports}}, cfg);
}

namespace {

std::string history_svg(const std::vector<EpochRecord> &h)
{
    svg::LineSeries tr{"train", {}, {}}, va{"validation", {}, {}};
    for (const auto &e : h) {
        tr.x.push_back(static_cast<double>(e.epoch));
        tr.y.push_back(e.train_mse);
        va.x.push_back(static_cast<double>(e.epoch));
        va.y.push_back(e.val_mse);
    }
    return svg::line_chart({{"Training history", "epoch", "MSE", {tr, va}}});
}

std::string lorenz_svg(const LorenzParams &p)
{
    const auto traj = lorenz_trajectory(p);
    svg::LineSeries x{"x", {}, {}}, y{"y", {}, {}}, z{"z", {}, {}}, xz{"x-z", {}, {}};
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const double t = static_cast<double>(k) * p.dt;
        x.x.push_back(t);
        x.y.push_back(traj[k][0]);
        y.x.push_back(t);
        y.y.push_back(traj[k][1]);
        z.x.push_back(t);
        z.y.push_back(traj[k][2]);
        xz.x.push_back(traj[k][0]);
        xz.y.push_back(traj[k][2]);
    }
    return svg::line_chart({{"Lorenz trajectory", "time", "state", {x, y, z}}, {"Attractor", "x", "z", {xz}}});
}

} // namespace

TrainOutput cmd_train(const RunConfig &cfg)
{
    const Circuit c = build_circuit(cfg);
    const GroupConfig gc = build_groups(cfg, c);
    const LorenzDataset data = make_lorenz_dataset(cfg.train);
    const SNNModel init = build_model(c, gc, cfg.train);
    const EvalMetrics before = evaluate(init, data.test);
    TrainResult res = train(init, data, cfg.train);
    const EvalMetrics after = evaluate(res.model, data.test);

    json history = json::array();
    for (const auto &e : res.history) {
        history.push_back({{"epoch", e.epoch}, {"train_mse", e.train_mse}, {"val_mse", e.val_mse}});
    }
    TrainOutput out{res.model, stamp(model_to_json(res.model, cfg.train), cfg), {}, history_svg(res.history)};
    out.summary = stamp(json{{"initial_train_mse", res.initial_train_mse},
                             {"history", history},
                             {"initial_test", to_json(before)},
                             {"test", to_json(after)},
                             {"test_mse_improvement_pct", -percent_change(after.mse, before.mse)}},
                        cfg);
    return out;
}

json cmd_eval(const RunConfig &cfg, const SNNModel &m, const TrainConfig &model_cfg,
              std::optional<std::size_t> rollout_teacher_steps)
{
    const LorenzDataset data = make_lorenz_dataset(model_cfg);
    json doc{{"test", to_json(evaluate(m, data.test))}};
    if (rollout_teacher_steps) {
        doc["rollout"] = to_json(evaluate_rollout(m, data.test, *rollout_teacher_steps));
        doc["rollout_teacher_steps"] = *rollout_teacher_steps;
    }
    return stamp(doc, cfg);
}

AblateOutput cmd_ablate(const RunConfig &cfg, const SNNModel &m, const TrainConfig &model_cfg)
{
    GroupConfig gc = cfg.groups_path ? load_groups(*cfg.groups_path) : default_groups();
    gc.validate_against(m.circuit);
    const auto groups = sweep_groups(cfg, gc);
    const LorenzDataset data = make_lorenz_dataset(model_cfg);
    const auto records = run_ablation_sweep(m, gc, data.test, groups, cfg.epsilon);
    const DualAxisReport rep = dual_axis_report(records, gc);

    svg::BarPanel esi_panel{"Energy axis: 100xESI (error-increasing)", "100xESI", {}, {}};
    for (const auto &r : rep.esi_ranking) {
        esi_panel.labels.push_back(r.group);
        esi_panel.values.push_back(100.0 * r.esi);
    }
    svg::BarPanel rsi_panel{"Robustness axis: RSI", "RSI", {}, {}};
    for (const auto &r : rep.rsi_ranking) {
        rsi_panel.labels.push_back(r.group);
        rsi_panel.values.push_back(r.rsi);
    }
    json doc = to_json(rep);
    doc["epsilon"] = cfg.epsilon;
    return {stamp(doc, cfg), to_markdown(rep), svg::bar_chart({esi_panel, rsi_panel})};
}

ScoresOutput cmd_scores(const RunConfig &cfg, const AccuracyTable &t, const std::optional<std::string> &model)
{
    json scores = json::object();
    if (model) {
        scores[*model] = degradation_score(t, *model);
    } else {
        for (const auto &[name, s] : degradation_scores(t)) scores[name] = s;
    }
    const bool budget = t.kind() == SweepKind::budget;
    svg::LinePanel panel{budget ? "Accuracy vs budget" : "Accuracy vs noise", budget ? "budget ratio" : "noise std",
                         "accuracy (%)", {}};
    for (const auto &name : t.models()) {
        if (model && name != *model) continue;
        std::vector<std::pair<double, double>> pts;
        for (const auto &r : t.rows()) {
            if (r.model == name) pts.emplace_back(r.condition, r.accuracy);
        }
        std::sort(pts.begin(), pts.end());
        svg::LineSeries s{name, {}, {}};
        for (const auto &[x, y] : pts) {
            s.x.push_back(x);
            s.y.push_back(y);
        }
        panel.series.push_back(std::move(s));
    }
    return {stamp(json{{"kind", to_string(t.kind())}, {"scores", scores}}, cfg), svg::line_chart({panel})};
}

namespace {

std::optional<json> read_doc(const fs::path &path)
{
    std::ifstream in(path);
    if (!in) return std::nullopt;
    try {
        return json::parse(in);
    } catch (const json::exception &e) {
        throw DataError("cannot parse " + path.string() + ": " + e.what());
    }
}

std::string fmt(double v, int prec)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

std::string metric(const json &m, const char *key)
{
    return m.contains(key) && m[key].is_number() ? fmt(m[key].get<double>(), 4) : std::string("n/a");
}

} // namespace

std::pair<json, std::string> cmd_report(const RunConfig &cfg, const fs::path &dir)
{
    json report = json::object();
    std::ostringstream md;
    md << "# Run report\n\nseed " << cfg.seed << ", config " << config_hash(cfg) << "\n";

    if (auto d = read_doc(dir / "stats.json")) {
        const auto &s = (*d)["stats"];
        report["stats"] = s;
        md << "\n## Graph\n\n| n | nonzero | density | spectral radius | prob range |\n|---|---|---|---|---|\n"
           << "| " << s["n"].get<std::size_t>() << " | " << s["nonzero_edges"].get<std::size_t>() << " | "
           << fmt(s["density"].get<double>(), 4) << " | " << fmt(s["spectral_radius"].get<double>(), 4) << " | "
           << fmt(s["prob_min"].get<double>(), 6) << " - " << fmt(s["prob_max"].get<double>(), 6) << " |\n";
    }
    if (auto d = read_doc(dir / "feasibility.json")) {
        report["feasibility"] = (*d)["feasibility"];
        md << "\n## Propagation\n\n| Pathway | Target | Spikes | First spike | Propagated |\n|---|---|---|---|---|\n";
        for (const auto &r : (*d)["feasibility"]) {
            md << "| " << r["pathway"].get<std::string>() << " | " << r["target_group"].get<std::string>() << " | "
               << r["target_spikes"].get<std::size_t>() << " | "
               << (r["first_target_spike_step"].is_null() ? std::string("-")
                                                          : std::to_string(r["first_target_spike_step"].get<std::size_t>()))
               << " | " << (r["propagated"].get<bool>() ? "yes" : "no") << " |\n";
        }
    }
    if (auto d = read_doc(dir / "training.json")) {
        const auto &before = (*d)["initial_test"];
        const auto &after = (*d)["test"];
        report["training"] = {{"initial_test", before},
                              {"test", after},
                              {"test_mse_improvement_pct", (*d)["test_mse_improvement_pct"]},
                              {"epochs", (*d)["history"].size()}};
        md << "\n## Training\n\n| Model | MSE | R2 | corr | spikes/sample |\n|---|---|---|---|---|\n"
           << "| initial | " << metric(before, "mse") << " | " << metric(before, "r2") << " | " << metric(before, "corr")
           << " | " << metric(before, "spikes_per_sample") << " |\n"
           << "| trained | " << metric(after, "mse") << " | " << metric(after, "r2") << " | " << metric(after, "corr")
           << " | " << metric(after, "spikes_per_sample") << " |\n";
    }
    if (auto d = read_doc(dir / "ablation.json")) {
        report["ablation"] = {{"top_energy", (*d)["top_energy"]}, {"top_robustness", (*d)["top_robustness"]}};
        std::vector<AblationRecord> records;
        for (const auto &r : (*d)["records"]) records.push_back(record_from_json(r));
        const std::string body = to_markdown(dual_axis_report(records, GroupConfig{}));
        md << "\n## Ablation\n" << body.substr(body.find('\n') + 1);
    }
    for (const char *kind : {"budget", "noise"}) {
        if (auto d = read_doc(dir / (std::string("scores_") + kind + ".json"))) {
            report["scores"][kind] = (*d)["scores"];
            md << "\n## " << (std::string(kind) == "budget" ? "Budget" : "Noise")
               << " degradation scores\n\n| Model | Score |\n|---|---|\n";
            for (const auto &[name, v] : (*d)["scores"].items()) md << "| " << name << " | " << fmt(v.get<double>(), 2) << " |\n";
        }
    }
    if (report.empty()) throw DataError("no stage outputs found in " + dir.string());
    return {stamp(report, cfg), md.str()};
}

namespace {

template <typename F>
auto run_stage(const std::string &stage, F &&fn) -> decltype(fn())
{
    try {
        return fn();
    } catch (const NumericError &e) {
        throw NumericError("stage '" + stage + "': " + e.what());
    } catch (const ConfigError &e) {
        throw ConfigError("stage '" + stage + "': " + e.what());
    } catch (const DataError &e) {
        throw DataError("stage '" + stage + "': " + e.what());
    } catch (const fs::filesystem_error &e) {
        throw DataError("stage '" + stage + "': " + e.what());
    }
}

} // namespace

json cmd_pipeline(const RunConfig &cfg)
{
    run_stage("config", [&] { cfg.validate(); });
    const fs::path dir = output_directory(cfg);
    write_json(dir / "config.json", stamp(run_config_to_json(cfg), cfg));

    run_stage("build", [&] {
        const Circuit circuit = build_circuit(cfg);
        const GroupConfig gc = build_groups(cfg, circuit);
        write_json(dir / "circuit.json", stamp(circuit_to_json(circuit), cfg));
        write_json(dir / "groups.json", groups_to_json(gc));
        json meta = json::object();
        for (const auto &[k, v] : circuit.metadata()) meta[k] = v;
        write_json(dir / "stats.json", stamp(json{{"stats", to_json(graph_stats(circuit))}, {"circuit_metadata", meta}}, cfg));
    });

    run_stage("feasibility", [&] {
        write_json(dir / "feasibility.json", cmd_simulate(cfg, cfg.pathways));
        write_text(dir / "lorenz_preview.svg", lorenz_svg(cfg.train.lorenz));
    });

    const SNNModel model = run_stage("train", [&] {
        TrainOutput t = cmd_train(cfg);
        write_json(dir / "model.json", t.checkpoint);
        write_json(dir / "training.json", t.summary);
        write_text(dir / "training.svg", t.history_svg);
        return t.model;
    });

    run_stage("sweep", [&] {
        const AblateOutput a = cmd_ablate(cfg, model, cfg.train);
        write_json(dir / "ablation.json", a.report);
        write_text(dir / "ablation.md", a.markdown);
        write_text(dir / "ablation.svg", a.svg);
    });

    run_stage("transfer", [&] {
        if (cfg.budget_table) {
            const ScoresOutput s = cmd_scores(cfg, load_accuracy_table(*cfg.budget_table, SweepKind::budget));
            write_json(dir / "scores_budget.json", s.doc);
            write_text(dir / "scores_budget.svg", s.svg);
        }
        if (cfg.noise_table) {
            const ScoresOutput s = cmd_scores(cfg, load_accuracy_table(*cfg.noise_table, SweepKind::noise));
            write_json(dir / "scores_noise.json", s.doc);
            write_text(dir / "scores_noise.svg", s.svg);
        }
    });

    return run_stage("report", [&] {
        auto [doc, md] = cmd_report(cfg, dir);
        write_json(dir / "report.json", doc);
        write_text(dir / "report.md", md);
        return doc;
    });
}

} // namespace tectum
