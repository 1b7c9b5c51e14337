#include "tectum/snn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "tectum/errors.hpp"
#include "tectum/random.hpp"

namespace tectum {

using nlohmann::json;

void TrainConfig::validate() const
{
    if (horizon < 1) throw ConfigError("horizon must be at least 1");
    if (train_windows < 1) throw ConfigError("train_windows must be at least 1");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (grad_clip < 0.0) throw ConfigError("grad_clip must be non-negative");
    lif.validate();
    syn.validate();
    if (lif.dt != syn.dt) throw ConfigError("LIF and synapse step sizes must agree");
}

json to_json(const TrainConfig &c)
{
    return json{{"epochs", c.epochs},
                {"horizon", c.horizon},
                {"lr", c.lr},
                {"seed", c.seed},
                {"train_windows", c.train_windows},
                {"val_windows", c.val_windows},
                {"test_windows", c.test_windows},
                {"batch_size", c.batch_size},
                {"grad_clip", c.grad_clip},
                {"transient_steps", c.transient_steps},
                {"coupling", c.coupling},
                {"input_gain", c.input_gain},
                {"tonic_current", c.tonic_current},
                {"input_group", c.input_group},
                {"output_group", c.output_group},
                {"lorenz",
                 {{"sigma", c.lorenz.sigma},
                  {"rho", c.lorenz.rho},
                  {"beta", c.lorenz.beta},
                  {"dt", c.lorenz.dt},
                  {"init", c.lorenz.init}}},
                {"lif",
                 {{"tau_m", c.lif.tau_m},
                  {"v_rest", c.lif.v_rest},
                  {"r_m", c.lif.r_m},
                  {"v_th", c.lif.v_th},
                  {"v_reset", c.lif.v_reset},
                  {"dt", c.lif.dt}}},
                {"syn", {{"tau_s", c.syn.tau_s}, {"dt", c.syn.dt}}}};
}

TrainConfig train_config_from_json(const json &j, TrainConfig c)
{
    auto get = [&j](const char *key, auto &field) {
        if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    try {
        get("epochs", c.epochs);
        get("horizon", c.horizon);
        get("lr", c.lr);
        get("seed", c.seed);
        get("train_windows", c.train_windows);
        get("val_windows", c.val_windows);
        get("test_windows", c.test_windows);
        get("batch_size", c.batch_size);
        get("grad_clip", c.grad_clip);
        get("transient_steps", c.transient_steps);
        get("coupling", c.coupling);
        get("input_gain", c.input_gain);
        get("tonic_current", c.tonic_current);
        get("input_group", c.input_group);
        get("output_group", c.output_group);
        if (j.contains("lorenz")) {
            const auto &l = j["lorenz"];
            if (l.contains("sigma")) c.lorenz.sigma = l["sigma"].get<double>();
            if (l.contains("rho")) c.lorenz.rho = l["rho"].get<double>();
            if (l.contains("beta")) c.lorenz.beta = l["beta"].get<double>();
            if (l.contains("dt")) c.lorenz.dt = l["dt"].get<double>();
            if (l.contains("init")) c.lorenz.init = l["init"].get<State3>();
        }
        if (j.contains("lif")) {
            const auto &l = j["lif"];
            if (l.contains("tau_m")) c.lif.tau_m = l["tau_m"].get<double>();
            if (l.contains("v_rest")) c.lif.v_rest = l["v_rest"].get<double>();
            if (l.contains("r_m")) c.lif.r_m = l["r_m"].get<double>();
            if (l.contains("v_th")) c.lif.v_th = l["v_th"].get<double>();
            if (l.contains("v_reset")) c.lif.v_reset = l["v_reset"].get<double>();
            if (l.contains("dt")) c.lif.dt = l["dt"].get<double>();
        }
        if (j.contains("syn")) {
            const auto &s = j["syn"];
            if (s.contains("tau_s")) c.syn.tau_s = s["tau_s"].get<double>();
            if (s.contains("dt")) c.syn.dt = s["dt"].get<double>();
        }
    } catch (const json::exception &e) {
        throw ConfigError(std::string("invalid training configuration: ") + e.what());
    }
    return c;
}

LorenzDataset make_lorenz_dataset(const TrainConfig &cfg)
{
    cfg.validate();
    const std::size_t n_windows = cfg.train_windows + cfg.val_windows + cfg.test_windows;
    LorenzParams lp = cfg.lorenz;
    lp.steps = cfg.transient_steps + n_windows * cfg.horizon;
    const auto traj = lorenz_trajectory(lp);

    const auto h = static_cast<Eigen::Index>(cfg.horizon);
    std::vector<LorenzWindow> windows;
    windows.reserve(n_windows);
    for (std::size_t w = 0; w < n_windows; ++w) {
        const std::size_t start = cfg.transient_steps + w * cfg.horizon;
        LorenzWindow win{Series(h, 3), Series(h, 3)};
        for (Eigen::Index t = 0; t < h; ++t) {
            for (int d = 0; d < 3; ++d) {
                win.inputs(t, d) = traj[start + static_cast<std::size_t>(t)][d];
                win.targets(t, d) = traj[start + static_cast<std::size_t>(t) + 1][d];
            }
        }
        windows.push_back(std::move(win));
    }

    Rng rng(cfg.seed);
    rng.shuffle(windows);

    LorenzDataset ds;
    auto first = windows.begin();
    ds.train.assign(first, first + static_cast<std::ptrdiff_t>(cfg.train_windows));
    first += static_cast<std::ptrdiff_t>(cfg.train_windows);
    ds.validation.assign(first, first + static_cast<std::ptrdiff_t>(cfg.val_windows));
    first += static_cast<std::ptrdiff_t>(cfg.val_windows);
    ds.test.assign(first, windows.end());

    // Statistics from the training inputs only.
    for (int d = 0; d < 3; ++d) {
        double sum = 0.0, sq = 0.0, count = 0.0;
        for (const auto &w : ds.train) {
            sum += w.inputs.col(d).sum();
            sq += w.inputs.col(d).squaredNorm();
            count += static_cast<double>(w.inputs.rows());
        }
        const double mean = sum / count;
        const double var = sq / count - mean * mean;
        ds.mean[d] = mean;
        ds.stddev[d] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    for (auto *split : {&ds.train, &ds.validation, &ds.test}) {
        for (auto &w : *split) {
            for (int d = 0; d < 3; ++d) {
                w.inputs.col(d) = (w.inputs.col(d).array() - ds.mean[d]) / ds.stddev[d];
                w.targets.col(d) = (w.targets.col(d).array() - ds.mean[d]) / ds.stddev[d];
            }
        }
    }
    return ds;
}

Matrix SNNModel::recurrent_weights() const
{
    return coupling * (circuit.matrix().array() * log_gain.array().exp()).matrix() * signs.asDiagonal();
}

namespace {

std::vector<std::size_t> indices_of(const Circuit &c, const NodeSet &nodes)
{
    std::vector<std::size_t> out;
    for (const auto &name : nodes) out.push_back(c.require_index(name));
    std::sort(out.begin(), out.end());
    return out;
}

void fill_uniform(Rng &rng, Matrix &m, double scale)
{
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-scale, scale);
    }
}

} // namespace

SNNModel build_model(const Circuit &c, const GroupConfig &gc, const TrainConfig &cfg)
{
    cfg.validate();
    gc.validate_against(c);
    if (gc.names_with_port(PortKind::input).empty()) throw ConfigError("group config defines no input-port group");
    if (gc.names_with_port(PortKind::output).empty()) throw ConfigError("group config defines no output-port group");
    if (!gc.contains(cfg.input_group) || gc.port(cfg.input_group) != PortKind::input) {
        throw ConfigError("input group '" + cfg.input_group + "' is missing or not an input port");
    }
    if (!gc.contains(cfg.output_group) || gc.port(cfg.output_group) != PortKind::output) {
        throw ConfigError("output group '" + cfg.output_group + "' is missing or not an output port");
    }

    SNNModel m{c, node_signs(c.node_names()), indices_of(c, gc.resolve(cfg.input_group)),
               indices_of(c, gc.resolve(cfg.output_group)), {}, {}, {}, {}, {}, {}, cfg.coupling, cfg.input_gain,
               cfg.tonic_current, cfg.lif, cfg.syn, cfg.seed};
    const auto n = static_cast<Eigen::Index>(c.size());
    const auto n_in = static_cast<Eigen::Index>(m.input_nodes.size());
    const auto n_out = static_cast<Eigen::Index>(m.output_nodes.size());

    Rng rng(cfg.seed);
    m.encoder_w.resize(n_in, 3);
    fill_uniform(rng, m.encoder_w, 1.0 / std::sqrt(3.0));
    m.encoder_b = Vector::Zero(n_in);
    m.readout_w.resize(3, n_out);
    fill_uniform(rng, m.readout_w, 1.0 / std::sqrt(static_cast<double>(n_out)));
    m.readout_b = Vector::Zero(3);
    m.log_gain = Matrix::Zero(n, n);
    m.active = Vector::Ones(n);
    return m;
}

SNNModel with_ablation(const SNNModel &m, const NodeSet &nodes)
{
    SNNModel out = m;
    out.circuit = ablate(m.circuit, nodes);
    for (const auto &name : nodes) out.active[static_cast<Eigen::Index>(m.circuit.require_index(name))] = 0.0;
    return out;
}

namespace {

struct Tape {
    std::vector<Vector> v_pre; // membrane potential before the reset
    std::vector<Vector> spikes;
    std::vector<Vector> filtered; // readout trace over output nodes
};

struct Sim {
    Series prediction;
    double total_spikes = 0.0;
};

inline double spike_value(double v, const LIFParams &lif, const SpikeFunction &fn)
{
    if (fn.kind == SpikeFunction::Kind::hard) return v >= lif.v_th ? 1.0 : 0.0;
    return 1.0 / (1.0 + std::exp(-(v - lif.v_th) / fn.width));
}

inline double spike_slope(double v, double s, const LIFParams &lif, const SpikeFunction &fn)
{
    if (fn.kind == SpikeFunction::Kind::hard) return std::abs(v - lif.v_th) < 0.5 * fn.width ? 1.0 : 0.0;
    return s * (1.0 - s) / fn.width;
}

// With teacher_steps >= 0 the network is fed its own previous prediction from
// that step on instead of the recorded input.
Sim simulate(const SNNModel &m, const Matrix &w, const Series &x, const SpikeFunction &fn, Tape *tape,
             Matrix *spike_trace, Eigen::Index teacher_steps = -1)
{
    const auto n = static_cast<Eigen::Index>(m.size());
    const auto steps = x.rows();
    const auto n_out = static_cast<Eigen::Index>(m.output_nodes.size());
    const double alpha = std::exp(-m.lif.dt / m.lif.tau_m);
    const double beta = std::exp(-m.syn.dt / m.syn.tau_s);

    Vector v = Vector::Constant(n, m.lif.v_rest);
    Vector i_syn = Vector::Zero(n);
    Vector r = Vector::Zero(n_out);
    Vector drive(n), v_pre(n), s(n);

    Sim sim{Series(steps, 3), 0.0};
    if (spike_trace) spike_trace->setZero(steps, n);
    if (tape) {
        tape->v_pre.resize(static_cast<std::size_t>(steps));
        tape->spikes.resize(static_cast<std::size_t>(steps));
        tape->filtered.resize(static_cast<std::size_t>(steps));
    }

    for (Eigen::Index t = 0; t < steps; ++t) {
        const bool free = teacher_steps >= 0 && t > 0 && t >= teacher_steps;
        const Vector xt = free ? Vector(sim.prediction.row(t - 1).transpose()) : Vector(x.row(t).transpose());
        const Vector enc = m.input_gain * (m.encoder_w * xt + m.encoder_b);
        drive = i_syn.array() + m.tonic_current;
        for (std::size_t k = 0; k < m.input_nodes.size(); ++k) {
            drive[static_cast<Eigen::Index>(m.input_nodes[k])] += enc[static_cast<Eigen::Index>(k)];
        }
        v_pre = alpha * v + (1.0 - alpha) * (m.lif.v_rest + m.lif.r_m * drive.array()).matrix();
        for (Eigen::Index k = 0; k < n; ++k) {
            if (m.active[k] == 0.0) {
                v_pre[k] = m.lif.v_rest;
                s[k] = 0.0;
            } else {
                s[k] = spike_value(v_pre[k], m.lif, fn);
            }
        }
        v = v_pre - (s.array() * (v_pre.array() - m.lif.v_reset)).matrix();
        i_syn = beta * i_syn + w * s;
        for (Eigen::Index k = 0; k < n_out; ++k) r[k] = beta * r[k] + s[static_cast<Eigen::Index>(m.output_nodes[static_cast<std::size_t>(k)])];
        sim.prediction.row(t) = (m.readout_w * r + m.readout_b).transpose();
        sim.total_spikes += s.sum();

        if (!v.allFinite() || !i_syn.allFinite() || !sim.prediction.row(t).allFinite()) {
            throw NumericError("non-finite network state at step " + std::to_string(t));
        }
        if (spike_trace) spike_trace->row(t) = s.transpose();
        if (tape) {
            const auto ut = static_cast<std::size_t>(t);
            tape->v_pre[ut] = v_pre;
            tape->spikes[ut] = s;
            tape->filtered[ut] = r;
        }
    }
    return sim;
}

Gradients zero_gradients(const SNNModel &m)
{
    return {Matrix::Zero(m.encoder_w.rows(), m.encoder_w.cols()), Vector::Zero(m.encoder_b.size()),
            Matrix::Zero(m.readout_w.rows(), m.readout_w.cols()), Vector::Zero(m.readout_b.size()),
            Matrix::Zero(m.log_gain.rows(), m.log_gain.cols())};
}

// Accumulates d(loss)/d(params) for one window given d(loss)/d(prediction).
void backward(const SNNModel &m, const Matrix &w, const Series &x, const Series &grad_y, const Tape &tape,
              const SpikeFunction &fn, Gradients &g, Matrix &grad_w)
{
    const auto n = static_cast<Eigen::Index>(m.size());
    const auto n_out = static_cast<Eigen::Index>(m.output_nodes.size());
    const double alpha = std::exp(-m.lif.dt / m.lif.tau_m);
    const double beta = std::exp(-m.syn.dt / m.syn.tau_s);

    Vector g_v_next = Vector::Zero(n);
    Vector g_i_next = Vector::Zero(n);
    Vector g_r_next = Vector::Zero(n_out);
    Vector g_s(n), g_vpre(n);

    for (Eigen::Index t = x.rows() - 1; t >= 0; --t) {
        const auto ut = static_cast<std::size_t>(t);
        const Vector &v_pre = tape.v_pre[ut];
        const Vector &s = tape.spikes[ut];
        const Vector gy = grad_y.row(t).transpose();

        g.readout_w.noalias() += gy * tape.filtered[ut].transpose();
        g.readout_b += gy;
        const Vector g_r = m.readout_w.transpose() * gy + beta * g_r_next;

        g_s.noalias() = w.transpose() * g_i_next;
        for (Eigen::Index k = 0; k < n_out; ++k) g_s[static_cast<Eigen::Index>(m.output_nodes[static_cast<std::size_t>(k)])] += g_r[k];
        grad_w.noalias() += g_i_next * s.transpose();

        for (Eigen::Index k = 0; k < n; ++k) {
            if (m.active[k] == 0.0) {
                g_vpre[k] = 0.0;
                continue;
            }
            const double gs = g_s[k] - g_v_next[k] * (v_pre[k] - m.lif.v_reset);
            g_vpre[k] = g_v_next[k] * (1.0 - s[k]) + gs * spike_slope(v_pre[k], s[k], m.lif, fn);
        }
        const Vector g_drive = (1.0 - alpha) * m.lif.r_m * g_vpre;
        for (std::size_t k = 0; k < m.input_nodes.size(); ++k) {
            const double gd = m.input_gain * g_drive[static_cast<Eigen::Index>(m.input_nodes[k])];
            g.encoder_w.row(static_cast<Eigen::Index>(k)) += gd * x.row(t);
            g.encoder_b[static_cast<Eigen::Index>(k)] += gd;
        }
        g_v_next = alpha * g_vpre;
        g_i_next = g_drive + beta * g_i_next;
        g_r_next = g_r;
    }
}

} // namespace

ForwardResult forward(const SNNModel &m, const Series &inputs)
{
    ForwardResult res;
    auto sim = simulate(m, m.recurrent_weights(), inputs, SpikeFunction{}, nullptr, &res.spikes);
    res.prediction = std::move(sim.prediction);
    res.total_spikes = sim.total_spikes;
    return res;
}

ForwardResult rollout(const SNNModel &m, const Series &inputs, std::size_t teacher_steps)
{
    ForwardResult res;
    auto sim = simulate(m, m.recurrent_weights(), inputs, SpikeFunction{}, nullptr, &res.spikes,
                        static_cast<Eigen::Index>(teacher_steps));
    res.prediction = std::move(sim.prediction);
    res.total_spikes = sim.total_spikes;
    return res;
}

std::pair<double, Gradients> loss_and_gradient(const SNNModel &m, std::span<const LorenzWindow> windows,
                                               SpikeFunction fn)
{
    if (windows.empty()) throw DataError("loss over an empty window set");
    const Matrix w = m.recurrent_weights();
    Gradients g = zero_gradients(m);
    Matrix grad_w = Matrix::Zero(w.rows(), w.cols());
    double count = 0.0;
    for (const auto &win : windows) count += static_cast<double>(win.targets.size());

    double total = 0.0;
    Tape tape;
    for (const auto &win : windows) {
        const auto sim = simulate(m, w, win.inputs, fn, &tape, nullptr);
        const Series err = sim.prediction - win.targets;
        total += err.squaredNorm();
        const Series grad_y = (2.0 / count) * err;
        backward(m, w, win.inputs, grad_y, tape, fn, g, grad_w);
    }
    // w = sign * A * exp(log_gain), so d/d(log_gain) = d/dw * w.
    g.log_gain = grad_w.cwiseProduct(w);
    return {total / count, std::move(g)};
}

double loss(const SNNModel &m, std::span<const LorenzWindow> windows, SpikeFunction fn)
{
    if (windows.empty()) throw DataError("loss over an empty window set");
    const Matrix w = m.recurrent_weights();
    double total = 0.0, count = 0.0;
    for (const auto &win : windows) {
        const auto sim = simulate(m, w, win.inputs, fn, nullptr, nullptr);
        total += (sim.prediction - win.targets).squaredNorm();
        count += static_cast<double>(win.targets.size());
    }
    return total / count;
}

namespace {

struct Adam {
    double lr, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    long step = 0;
    Gradients m1, m2;

    template <typename P, typename G>
    void update(P &param, const G &grad, G &mom1, G &mom2) const
    {
        mom1 = b1 * mom1 + (1.0 - b1) * grad;
        mom2 = b2 * mom2 + (1.0 - b2) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
        param.array() -= lr * (mom1.array() / c1) / ((mom2.array() / c2).sqrt() + eps);
    }

    void apply(SNNModel &model, const Gradients &g)
    {
        ++step;
        update(model.encoder_w, g.encoder_w, m1.encoder_w, m2.encoder_w);
        update(model.encoder_b, g.encoder_b, m1.encoder_b, m2.encoder_b);
        update(model.readout_w, g.readout_w, m1.readout_w, m2.readout_w);
        update(model.readout_b, g.readout_b, m1.readout_b, m2.readout_b);
        update(model.log_gain, g.log_gain, m1.log_gain, m2.log_gain);
    }
};

double global_norm(const Gradients &g)
{
    return std::sqrt(g.encoder_w.squaredNorm() + g.encoder_b.squaredNorm() + g.readout_w.squaredNorm() +
                     g.readout_b.squaredNorm() + g.log_gain.squaredNorm());
}

void scale(Gradients &g, double f)
{
    g.encoder_w *= f;
    g.encoder_b *= f;
    g.readout_w *= f;
    g.readout_b *= f;
    g.log_gain *= f;
}

} // namespace

TrainResult train(const SNNModel &m, const LorenzDataset &data, const TrainConfig &cfg)
{
    cfg.validate();
    if (data.train.empty()) throw DataError("training split is empty");
    TrainResult res{m, {}, loss(m, data.train)};
    if (!std::isfinite(res.initial_train_mse)) throw NumericError("initial training loss is not finite");

    Adam opt{cfg.lr, 0.9, 0.999, 1e-8, 0, zero_gradients(m), zero_gradients(m)};
    Rng rng(cfg.seed ^ 0x5bd1e995ULL);
    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<LorenzWindow> batch;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
            batch.clear();
            for (std::size_t k = b; k < std::min(order.size(), b + cfg.batch_size); ++k) batch.push_back(data.train[order[k]]);
            auto [l, g] = loss_and_gradient(res.model, batch);
            if (!std::isfinite(l)) throw NumericError("training diverged at epoch " + std::to_string(epoch));
            if (cfg.grad_clip > 0.0) {
                const double norm = global_norm(g);
                if (norm > cfg.grad_clip) scale(g, cfg.grad_clip / norm);
            }
            opt.apply(res.model, g);
        }
        EpochRecord rec{epoch, loss(res.model, data.train), 0.0};
        rec.val_mse = data.validation.empty() ? rec.train_mse : loss(res.model, data.validation);
        if (!std::isfinite(rec.train_mse) || !std::isfinite(rec.val_mse)) {
            throw NumericError("training diverged at epoch " + std::to_string(epoch));
        }
        res.history.push_back(rec);
    }
    return res;
}

json to_json(const EvalMetrics &e)
{
    json j{{"mse", e.mse}, {"spikes_per_sample", e.spikes_per_sample}};
    j["r2"] = e.r2 ? json(*e.r2) : json(nullptr);
    j["r2_defined"] = e.r2.has_value();
    j["corr"] = e.corr ? json(*e.corr) : json(nullptr);
    j["corr_defined"] = e.corr.has_value();
    return j;
}

EvalMetrics score_predictions(std::span<const Series> predictions, std::span<const Series> targets,
                              double total_spikes)
{
    if (predictions.empty() || predictions.size() != targets.size()) {
        throw DataError("evaluation needs a non-empty, matched set of predictions and targets");
    }
    double count = 0.0, sum_y = 0.0, sum_p = 0.0;
    for (std::size_t k = 0; k < targets.size(); ++k) {
        count += static_cast<double>(targets[k].size());
        sum_y += targets[k].sum();
        sum_p += predictions[k].sum();
    }
    const double mean_y = sum_y / count;
    const double mean_p = sum_p / count;
    double ss_res = 0.0, ss_tot = 0.0, ss_p = 0.0, cross = 0.0;
    for (std::size_t k = 0; k < targets.size(); ++k) {
        const auto dy = (targets[k].array() - mean_y);
        const auto dp = (predictions[k].array() - mean_p);
        ss_res += (predictions[k] - targets[k]).squaredNorm();
        ss_tot += dy.square().sum();
        ss_p += dp.square().sum();
        cross += (dy * dp).sum();
    }
    EvalMetrics e;
    e.mse = ss_res / count;
    if (ss_tot > 0.0) e.r2 = 1.0 - ss_res / ss_tot;
    if (ss_tot > 0.0 && ss_p > 0.0) e.corr = std::clamp(cross / std::sqrt(ss_tot * ss_p), -1.0, 1.0);
    e.spikes_per_sample = total_spikes / static_cast<double>(targets.size());
    return e;
}

EvalMetrics evaluate(const SNNModel &m, std::span<const LorenzWindow> windows)
{
    if (windows.empty()) throw DataError("evaluation dataset is empty");
    const Matrix w = m.recurrent_weights();
    std::vector<Series> preds, targets;
    double spikes = 0.0;
    for (const auto &win : windows) {
        auto sim = simulate(m, w, win.inputs, SpikeFunction{}, nullptr, nullptr);
        spikes += sim.total_spikes;
        preds.push_back(std::move(sim.prediction));
        targets.push_back(win.targets);
    }
    return score_predictions(preds, targets, spikes);
}

EvalMetrics evaluate_rollout(const SNNModel &m, std::span<const LorenzWindow> windows, std::size_t teacher_steps)
{
    if (windows.empty()) throw DataError("evaluation dataset is empty");
    std::vector<Series> preds, targets;
    double spikes = 0.0;
    for (const auto &win : windows) {
        auto res = rollout(m, win.inputs, teacher_steps);
        spikes += res.total_spikes;
        preds.push_back(std::move(res.prediction));
        targets.push_back(win.targets);
    }
    return score_predictions(preds, targets, spikes);
}

namespace {

json array_entry(const Matrix &m)
{
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    }
    return json{{"shape", {m.rows(), m.cols()}}, {"data", std::move(data)}};
}

Matrix read_array(const json &arrays, const std::string &key)
{
    if (!arrays.contains(key)) throw DataError("checkpoint is missing array '" + key + "'");
    const auto &e = arrays[key];
    const auto shape = e.at("shape").get<std::vector<Eigen::Index>>();
    const auto data = e.at("data").get<std::vector<double>>();
    if (shape.size() != 2 || static_cast<Eigen::Index>(data.size()) != shape[0] * shape[1]) {
        throw DataError("checkpoint array '" + key + "' has inconsistent shape");
    }
    Matrix m(shape[0], shape[1]);
    for (Eigen::Index i = 0; i < shape[0]; ++i) {
        for (Eigen::Index j = 0; j < shape[1]; ++j) m(i, j) = data[static_cast<std::size_t>(i * shape[1] + j)];
    }
    return m;
}

std::vector<std::string> names_at(const Circuit &c, const std::vector<std::size_t> &idx)
{
    std::vector<std::string> out;
    for (auto k : idx) out.push_back(c.node_names()[k]);
    return out;
}

} // namespace

json model_to_json(const SNNModel &m, const TrainConfig &cfg)
{
    json arrays{{"circuit.matrix", array_entry(m.circuit.matrix())},
                {"signs", array_entry(m.signs)},
                {"active", array_entry(m.active)},
                {"encoder.weight", array_entry(m.encoder_w)},
                {"encoder.bias", array_entry(m.encoder_b)},
                {"readout.weight", array_entry(m.readout_w)},
                {"readout.bias", array_entry(m.readout_b)},
                {"recurrent.log_gain", array_entry(m.log_gain)}};
    return json{{"format", "tectum.snn.checkpoint"},
                {"version", 1},
                {"seed", m.seed},
                {"config", to_json(cfg)},
                {"nodes", m.circuit.node_names()},
                {"circuit_metadata", m.circuit.metadata()},
                {"input_nodes", names_at(m.circuit, m.input_nodes)},
                {"output_nodes", names_at(m.circuit, m.output_nodes)},
                {"arrays", std::move(arrays)}};
}

SNNModel model_from_json(const json &doc, TrainConfig *cfg_out)
{
    try {
        if (doc.value("format", "") != "tectum.snn.checkpoint") throw DataError("not a model checkpoint");
        const auto &arrays = doc.at("arrays");
        const Matrix a = read_array(arrays, "circuit.matrix");
        Circuit c(doc.at("nodes").get<std::vector<std::string>>(), a,
                  doc.value("circuit_metadata", std::map<std::string, std::string>{}));
        const TrainConfig cfg = train_config_from_json(doc.at("config"));
        if (cfg_out) *cfg_out = cfg;
        std::vector<std::size_t> in, out;
        for (const auto &name : doc.at("input_nodes")) in.push_back(c.require_index(name.get<std::string>()));
        for (const auto &name : doc.at("output_nodes")) out.push_back(c.require_index(name.get<std::string>()));
        SNNModel m{c,
                   read_array(arrays, "signs").col(0),
                   in,
                   out,
                   read_array(arrays, "encoder.weight"),
                   read_array(arrays, "encoder.bias").col(0),
                   read_array(arrays, "readout.weight"),
                   read_array(arrays, "readout.bias").col(0),
                   read_array(arrays, "recurrent.log_gain"),
                   read_array(arrays, "active").col(0),
                   cfg.coupling,
                   cfg.input_gain,
                   cfg.tonic_current,
                   cfg.lif,
                   cfg.syn,
                   doc.at("seed").get<std::uint64_t>()};
        const auto n = static_cast<Eigen::Index>(c.size());
        if (m.signs.size() != n || m.active.size() != n || m.log_gain.rows() != n || m.log_gain.cols() != n ||
            m.encoder_w.rows() != static_cast<Eigen::Index>(in.size()) || m.encoder_w.cols() != 3 ||
            m.readout_w.cols() != static_cast<Eigen::Index>(out.size()) || m.readout_w.rows() != 3) {
            throw DataError("checkpoint arrays do not match the circuit size");
        }
        return m;
    } catch (const json::exception &e) {
        throw DataError(std::string("malformed checkpoint: ") + e.what());
    }
}

void save_model(const SNNModel &m, const TrainConfig &cfg, const std::filesystem::path &path)
{
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << model_to_json(m, cfg).dump() << '\n';
}

SNNModel load_model(const std::filesystem::path &path, TrainConfig *cfg_out)
{
    std::ifstream in(path);
    if (!in) throw DataError("file not found: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error &e) {
        throw DataError("cannot parse " + path.string() + ": " + e.what());
    }
    return model_from_json(doc, cfg_out);
}

} // namespace tectum
