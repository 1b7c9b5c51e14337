// tectum: connectivity statistics, propagation checks, SNN training,
// substructure ablation and degradation scores from the command line.
//
// Exit codes: 0 success, 1 unexpected failure, 2 bad configuration or
// arguments, 3 bad input data, 4 numerical failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tectum/errors.hpp"
#include "tectum/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tectum;

namespace {

struct CommonOpts {
    std::string config;
    std::string matrix;
    bool synthesize = false;
    std::string rescale;
    std::string group_file;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App *cmd, CommonOpts &o, bool circuit = true)
{
    cmd->add_option("--config", o.config, "Run config (JSON)");
    if (circuit) {
        cmd->add_option("--matrix", o.matrix, "Connection-matrix document");
        cmd->add_flag("--synthesize", o.synthesize, "Synthesize the statistics-matched surrogate circuit");
        cmd->add_option("--rescale", o.rescale, "Synthesis rescale mode: multiplicative or range_preserving");
        cmd->add_option("--groups,--group-file", o.group_file, "Substructure definitions (JSON)");
    }
    cmd->add_option("--seed", o.seed, "Global seed, overrides the config");
    cmd->add_option("--out", o.out, "Output directory");
}

RunConfig make_config(const CommonOpts &o, bool need_circuit)
{
    RunConfig cfg = o.config.empty() ? RunConfig{} : load_run_config(o.config);
    if (!o.matrix.empty() && o.synthesize) throw ConfigError("--matrix and --synthesize are mutually exclusive");
    if (!o.matrix.empty()) {
        cfg.matrix_path = o.matrix;
        cfg.synthesis.reset();
    }
    if (o.synthesize) {
        cfg.synthesis = default_synthesis_spec(cfg.seed);
        cfg.matrix_path.reset();
    }
    if (!o.rescale.empty()) {
        if (!cfg.synthesis) throw ConfigError("--rescale only applies to a synthesized circuit");
        if (o.rescale == "multiplicative") {
            cfg.synthesis->rescale = RescaleMode::multiplicative;
        } else if (o.rescale == "range_preserving") {
            cfg.synthesis->rescale = RescaleMode::range_preserving;
        } else {
            throw ConfigError("unknown rescale mode '" + o.rescale + "'");
        }
    }
    if (!o.group_file.empty()) cfg.groups_path = o.group_file;
    cfg.apply_seed(o.seed.value_or(cfg.seed));
    if (!o.out.empty()) cfg.output_dir = o.out;
    if (need_circuit && !cfg.matrix_path && !cfg.synthesis) {
        throw ConfigError("no circuit: pass --matrix, --synthesize or a config with a circuit section");
    }
    return cfg;
}

std::vector<std::string> split_list(const std::string &s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

void print(const json &doc) { std::cout << doc.dump(2) << '\n'; }

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Connectivity-constrained spiking network toolkit"};
    app.require_subcommand(1);

    CommonOpts stats_o, sim_o, train_o, eval_o, ablate_o, scores_o, report_o, pipe_o;

    auto *stats = app.add_subcommand("stats", "Graph statistics of a circuit");
    add_common(stats, stats_o);
    std::string save_matrix;
    stats->add_option("--save-matrix", save_matrix, "Write the circuit document to this path");

    auto *simulate = app.add_subcommand("simulate", "Pulse propagation feasibility check");
    add_common(simulate, sim_o);
    std::vector<std::string> pathways;
    std::optional<double> pulse_amplitude, weight_gain;
    std::optional<std::size_t> pulse_steps, window;
    std::string mode, trace_path;
    simulate->add_option("--pathway", pathways, "Pathway name (R2O, R2E); repeatable");
    simulate->add_option("--pulse-amplitude", pulse_amplitude, "Injected current per source node");
    simulate->add_option("--pulse-steps", pulse_steps, "Pulse duration in steps");
    simulate->add_option("--window", window, "Simulation window in steps");
    simulate->add_option("--weight-gain", weight_gain, "Probability-to-weight coupling");
    simulate->add_option("--mode", mode, "Target activity measure: spikes or current");
    simulate->add_option("--trace", trace_path, "Write the activity trace as CSV");

    auto *train_cmd = app.add_subcommand("train", "Train the SNN on Lorenz one-step prediction");
    add_common(train_cmd, train_o);
    std::optional<std::size_t> epochs;
    train_cmd->add_option("--epochs", epochs, "Training epochs");

    auto *eval_cmd = app.add_subcommand("eval", "Held-out metrics of a checkpoint");
    add_common(eval_cmd, eval_o, false);
    std::string eval_model;
    eval_cmd->add_option("--model", eval_model, "Model checkpoint")->required();
    std::optional<std::size_t> rollout_steps;
    eval_cmd->add_option("--rollout", rollout_steps, "Also report free-running metrics after this many forced steps");

    auto *ablate = app.add_subcommand("ablate", "Substructure ablation sweep and dual-axis report");
    add_common(ablate, ablate_o, false);
    ablate->add_option("--group-file", ablate_o.group_file, "Substructure definitions (JSON)");
    std::string ablate_model, ablate_groups;
    std::optional<double> epsilon;
    ablate->add_option("--model", ablate_model, "Model checkpoint")->required();
    ablate->add_option("--groups", ablate_groups, "Comma-separated group names, or 'all'");
    ablate->add_option("--epsilon", epsilon, "ESI stabiliser");

    auto *scores = app.add_subcommand("scores", "Budget or noise degradation scores");
    add_common(scores, scores_o, false);
    std::string kind, table, score_model;
    scores->add_option("--kind", kind, "budget or noise")->required();
    scores->add_option("--table", table, "Accuracy CSV (model,condition,accuracy)")->required();
    scores->add_option("--model", score_model, "Score one model only");

    auto *report = app.add_subcommand("report", "Combine stage outputs in a directory into one report");
    add_common(report, report_o, false);
    std::string report_dir;
    report->add_option("--dir", report_dir, "Directory holding stage outputs (default: output directory)");

    auto *pipeline = app.add_subcommand("pipeline", "Run every stage and persist the outputs");
    add_common(pipeline, pipe_o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*stats) {
            const RunConfig cfg = make_config(stats_o, true);
            const json doc = cmd_stats(cfg);
            if (!save_matrix.empty()) save_circuit(build_circuit(cfg), save_matrix);
            if (!stats_o.out.empty()) write_json(output_directory(cfg) / "stats.json", doc);
            print(doc);
        } else if (*simulate) {
            RunConfig cfg = make_config(sim_o, true);
            if (pulse_amplitude) cfg.propagation.pulse_amplitude = *pulse_amplitude;
            if (pulse_steps) cfg.propagation.pulse_steps = *pulse_steps;
            if (window) cfg.propagation.window = *window;
            if (weight_gain) cfg.propagation.weight_gain = *weight_gain;
            if (!mode.empty()) {
                if (mode != "spikes" && mode != "current") throw ConfigError("unknown mode '" + mode + "'");
                cfg.propagation.mode = mode == "spikes" ? ActivityMode::spikes : ActivityMode::current;
            }
            if (!pathways.empty()) cfg.pathways = pathways;
            cfg.validate();
            std::ofstream trace;
            if (!trace_path.empty()) {
                if (fs::path(trace_path).has_parent_path()) fs::create_directories(fs::path(trace_path).parent_path());
                trace.open(trace_path);
                if (!trace) throw DataError("cannot write " + trace_path);
            }
            const json doc = cmd_simulate(cfg, cfg.pathways, trace_path.empty() ? nullptr : &trace);
            if (!sim_o.out.empty()) write_json(output_directory(cfg) / "feasibility.json", doc);
            print(doc);
        } else if (*train_cmd) {
            RunConfig cfg = make_config(train_o, true);
            if (epochs) cfg.train.epochs = *epochs;
            cfg.validate();
            const TrainOutput t = cmd_train(cfg);
            const fs::path dir = output_directory(cfg);
            write_json(dir / "model.json", t.checkpoint);
            write_json(dir / "training.json", t.summary);
            write_text(dir / "training.svg", t.history_svg);
            print(json{{"initial_test", t.summary["initial_test"]},
                       {"test", t.summary["test"]},
                       {"model", (dir / "model.json").generic_string()}});
        } else if (*eval_cmd) {
            const RunConfig cfg = make_config(eval_o, false);
            TrainConfig model_cfg;
            const SNNModel m = load_model(eval_model, &model_cfg);
            const json doc = cmd_eval(cfg, m, model_cfg, rollout_steps);
            if (!eval_o.out.empty()) write_json(output_directory(cfg) / "metrics.json", doc);
            print(doc);
        } else if (*ablate) {
            RunConfig cfg = make_config(ablate_o, false);
            if (!ablate_groups.empty()) cfg.ablation_groups = split_list(ablate_groups);
            if (epsilon) cfg.epsilon = *epsilon;
            if (cfg.ablation_groups.empty()) throw ConfigError("ablation group list is empty");
            TrainConfig model_cfg;
            const SNNModel m = load_model(ablate_model, &model_cfg);
            const AblateOutput a = cmd_ablate(cfg, m, model_cfg);
            const fs::path dir = output_directory(cfg);
            write_json(dir / "ablation.json", a.report);
            write_text(dir / "ablation.md", a.markdown);
            write_text(dir / "ablation.svg", a.svg);
            std::cout << a.markdown;
        } else if (*scores) {
            const RunConfig cfg = make_config(scores_o, false);
            const SweepKind k = sweep_kind_from_string(kind);
            const AccuracyTable t = load_accuracy_table(table, k);
            const ScoresOutput s =
                cmd_scores(cfg, t, score_model.empty() ? std::nullopt : std::optional<std::string>(score_model));
            if (!scores_o.out.empty()) {
                const fs::path dir = output_directory(cfg);
                write_json(dir / ("scores_" + kind + ".json"), s.doc);
                write_text(dir / ("scores_" + kind + ".svg"), s.svg);
            }
            print(s.doc);
        } else if (*report) {
            const RunConfig cfg = make_config(report_o, false);
            const fs::path dir = report_dir.empty() ? output_directory(cfg) : fs::path(report_dir);
            const auto [doc, md] = cmd_report(cfg, dir);
            write_json(dir / "report.json", doc);
            write_text(dir / "report.md", md);
            std::cout << md;
        } else if (*pipeline) {
            const RunConfig cfg = make_config(pipe_o, true);
            const json doc = cmd_pipeline(cfg);
            std::cout << "outputs written to " << output_directory(cfg).generic_string() << '\n';
            print(doc);
        }
    } catch (const ConfigError &e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const DataError &e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const NumericError &e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
