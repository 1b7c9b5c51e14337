#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "tectum/errors.hpp"
#include "tectum/snn.hpp"
#include "test_util.hpp"

using namespace tectum;

namespace {

GroupConfig ports(const NodeSet &in, const NodeSet &out)
{
    GroupConfig gc;
    gc.add("RGC_input", in, PortKind::input);
    gc.add("TPN_output", out, PortKind::output);
    return gc;
}

Series random_series(Rng &rng, Eigen::Index rows, double scale)
{
    Series s(rows, 3);
    for (Eigen::Index t = 0; t < rows; ++t) {
        for (int d = 0; d < 3; ++d) s(t, d) = rng.uniform(-scale, scale);
    }
    return s;
}

void randomise(Rng &rng, SNNModel &m, double scale)
{
    for (auto *mat : {&m.encoder_w, &m.readout_w}) {
        for (Eigen::Index k = 0; k < mat->size(); ++k) mat->data()[k] = rng.uniform(-scale, scale);
    }
    for (auto *vec : {&m.encoder_b, &m.readout_b}) {
        for (Eigen::Index k = 0; k < vec->size(); ++k) (*vec)[k] = rng.uniform(-scale, scale);
    }
    for (Eigen::Index k = 0; k < m.log_gain.size(); ++k) {
        if (m.circuit.matrix().data()[k] > 0.0) m.log_gain.data()[k] = rng.uniform(-0.3, 0.3);
    }
}

// Visits every trainable scalar of a model alongside its gradient entry.
template <typename F>
void for_each_param(SNNModel &m, Gradients &g, F &&fn)
{
    auto visit = [&](auto &p, auto &gp, const char *name) {
        for (Eigen::Index k = 0; k < p.size(); ++k) fn(p.data()[k], gp.data()[k], name, k);
    };
    visit(m.encoder_w, g.encoder_w, "encoder_w");
    visit(m.encoder_b, g.encoder_b, "encoder_b");
    visit(m.readout_w, g.readout_w, "readout_w");
    visit(m.readout_b, g.readout_b, "readout_b");
    visit(m.log_gain, g.log_gain, "log_gain");
}

TrainConfig small_config()
{
    TrainConfig cfg;
    cfg.horizon = 40;
    cfg.train_windows = 8;
    cfg.val_windows = 2;
    cfg.test_windows = 4;
    cfg.transient_steps = 200;
    return cfg;
}

} // namespace

TEST_CASE("build_model wiring and determinism")
{
    const Circuit c = load_circuit(testutil::fixture("surrogate.json"));
    const GroupConfig gc = default_groups();
    const TrainConfig cfg;
    const SNNModel a = build_model(c, gc, cfg);
    const SNNModel b = build_model(c, gc, cfg);
    CHECK(a.encoder_w == b.encoder_w);
    CHECK(a.readout_w == b.readout_w);

    CHECK(a.input_nodes.size() == 8);
    CHECK(a.encoder_w.rows() == 8);
    CHECK(a.encoder_w.cols() == 3);
    CHECK(a.readout_w.rows() == 3);
    CHECK(a.readout_w.cols() == 5);
    CHECK(a.encoder_w.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(3.0));
    CHECK(a.readout_w.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(5.0));
    CHECK(std::abs(a.encoder_w.mean()) < 0.2);

    const Matrix w = a.recurrent_weights();
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            CHECK(w(i, j) == doctest::Approx(cfg.coupling * a.signs[j] * c.matrix()(i, j)));
        }
    }

    TrainConfig other = cfg;
    other.seed = 43;
    CHECK_FALSE(build_model(c, gc, other).encoder_w == a.encoder_w);

    GroupConfig no_out;
    no_out.add("RGC_input", gc.resolve("RGC_input"), PortKind::input);
    CHECK_THROWS_AS(build_model(c, no_out, cfg), ConfigError);
}

TEST_CASE("dead network predicts zero and never spikes")
{
    const Circuit c = load_circuit(testutil::fixture("surrogate.json"));
    SNNModel m = build_model(c, default_groups(), TrainConfig{});
    m.encoder_w.setZero();
    m.readout_w.setZero();
    m.tonic_current = 0.0;
    Rng rng(1);
    const auto res = forward(m, random_series(rng, 50, 2.0));
    CHECK(res.prediction.cwiseAbs().maxCoeff() == 0.0);
    CHECK(res.total_spikes == 0.0);
}

TEST_CASE("single neuron under constant drive fires periodically")
{
    const Circuit c({"solo"}, Matrix::Zero(1, 1));
    SNNModel m = build_model(c, ports({"solo"}, {"solo"}), TrainConfig{});
    m.encoder_w.setZero();
    m.tonic_current = 1.5;
    const double t_star = m.lif.tau_m * std::log(1.5 / (1.5 - 1.0));
    const long period = static_cast<long>(std::ceil(t_star / m.lif.dt));
    const auto res = forward(m, Series::Zero(200, 3));
    for (Eigen::Index t = 0; t < 200; ++t) {
        CAPTURE(t);
        CHECK(res.spikes(t, 0) == ((t + 1) % period == 0 ? 1.0 : 0.0));
    }
    CHECK(res.total_spikes == static_cast<double>(200 / period));
}

TEST_CASE("gradients match central finite differences with a smooth spike function")
{
    Matrix a(2, 2);
    a << 0.2, 0.3, 0.5, 0.4;
    const Circuit c({"in", "i_out"}, a);
    SNNModel m = build_model(c, ports({"in"}, {"i_out"}), TrainConfig{});
    m.tonic_current = 0.5;
    m.input_gain = 1.5;
    m.coupling = 1.2;
    Rng rng(99);
    randomise(rng, m, 0.8);

    std::vector<LorenzWindow> windows;
    for (int k = 0; k < 3; ++k) windows.push_back({random_series(rng, 30, 1.5), random_series(rng, 30, 1.0)});

    const SpikeFunction fn{SpikeFunction::Kind::smooth, 0.5};
    auto [l0, g] = loss_and_gradient(m, windows, fn);
    CHECK(l0 == doctest::Approx(loss(m, windows, fn)).epsilon(1e-12));

    std::size_t checked = 0;
    SNNModel probe = m;
    for_each_param(probe, g, [&](double &p, double grad, const char *name, Eigen::Index k) {
        const double h = 1e-5;
        const double keep = p;
        p = keep + h;
        const double up = loss(probe, windows, fn);
        p = keep - h;
        const double down = loss(probe, windows, fn);
        p = keep;
        const double fd = (up - down) / (2 * h);
        if (std::abs(fd) < 1e-7 && std::abs(grad) < 1e-7) return; // structurally zero
        CAPTURE(name);
        CAPTURE(k);
        CHECK(std::abs(grad - fd) <= 1e-3 * std::max(std::abs(fd), 1e-4));
        ++checked;
    });
    CHECK(checked >= 12);
}

TEST_CASE("hard spike function gradients are exact below threshold")
{
    Matrix a(2, 2);
    a << 0.0, 0.3, 0.5, 0.0;
    const Circuit c({"in", "out"}, a);
    SNNModel m = build_model(c, ports({"in"}, {"out"}), TrainConfig{});
    m.tonic_current = 0.0;
    m.input_gain = 0.05; // membrane stays far below the surrogate window
    Rng rng(4);
    randomise(rng, m, 0.5);
    std::vector<LorenzWindow> windows{{random_series(rng, 25, 1.0), random_series(rng, 25, 1.0)}};

    auto [l, g] = loss_and_gradient(m, windows);
    CHECK(forward(m, windows[0].inputs).total_spikes == 0.0);
    // With no spikes the prediction is the readout bias alone.
    for (int d = 0; d < 3; ++d) {
        const double mean_err = (m.readout_b[d] - windows[0].targets.col(d).array()).sum();
        CHECK(g.readout_b[d] == doctest::Approx(2.0 * mean_err / 75.0).epsilon(1e-12));
    }
    CHECK(g.encoder_w.norm() == 0.0);
    CHECK(g.log_gain.norm() == 0.0);
    CHECK(g.readout_w.norm() == 0.0);
}

TEST_CASE("zero epochs leaves the model untouched")
{
    const Circuit c = load_circuit(testutil::fixture("surrogate.json"));
    TrainConfig cfg = small_config();
    cfg.epochs = 0;
    const SNNModel m = build_model(c, default_groups(), cfg);
    const auto res = train(m, make_lorenz_dataset(cfg), cfg);
    CHECK(res.history.empty());
    CHECK(res.model.encoder_w == m.encoder_w);
    CHECK(res.model.readout_w == m.readout_w);
    CHECK(res.model.log_gain == m.log_gain);
}

TEST_CASE("toy circuit learns a linear one-step map")
{
    Matrix a = Matrix::Constant(4, 4, 0.3);
    a.diagonal().setZero();
    const Circuit c({"a", "b", "c", "d"}, a);
    TrainConfig cfg = small_config();
    cfg.horizon = 50;
    cfg.train_windows = 16;
    cfg.lr = 3e-2;
    cfg.epochs = 150;
    cfg.coupling = 0.5;
    cfg.tonic_current = 0.5;
    LorenzDataset data = make_lorenz_dataset(cfg);
    for (auto *split : {&data.train, &data.validation, &data.test}) {
        for (auto &w : *split) w.targets = 0.9 * w.inputs;
    }
    const SNNModel m = build_model(c, ports({"a", "b"}, {"c", "d"}), cfg);
    const auto res = train(m, data, cfg);
    REQUIRE(res.history.size() == 150);
    CHECK(res.history.back().train_mse <= 0.5 * res.initial_train_mse);
}

TEST_CASE("training keeps topology and signs and does not increase the loss")
{
    const Circuit c = load_circuit(testutil::fixture("surrogate.json"));
    TrainConfig cfg = small_config();
    cfg.epochs = 5;
    cfg.lr = 1e-2;
    const LorenzDataset data = make_lorenz_dataset(cfg);
    const SNNModel m = build_model(c, default_groups(), cfg);
    const auto res = train(m, data, cfg);
    CHECK(res.history.back().train_mse <= res.initial_train_mse);
    CHECK_FALSE(res.model.log_gain == m.log_gain);

    const Matrix w = res.model.recurrent_weights();
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            if (c.matrix()(i, j) == 0.0) {
                CHECK(w(i, j) == 0.0);
            } else {
                CHECK(w(i, j) * res.model.signs[j] > 0.0);
            }
        }
    }

    // Same seed, same result.
    const auto again = train(m, data, cfg);
    CHECK(again.model.log_gain == res.model.log_gain);
}

TEST_CASE("dataset windows, splits and normalisation")
{
    TrainConfig cfg = small_config();
    const LorenzDataset d = make_lorenz_dataset(cfg);
    CHECK(d.train.size() == 8);
    CHECK(d.validation.size() == 2);
    CHECK(d.test.size() == 4);
    for (const auto &w : d.train) {
        CHECK(w.inputs.rows() == 40);
        // Teacher forcing: the target at t is the input at t + 1.
        CHECK((w.targets.topRows(39) - w.inputs.bottomRows(39)).cwiseAbs().maxCoeff() < 1e-12);
    }
    for (int dim = 0; dim < 3; ++dim) {
        double sum = 0.0, sq = 0.0;
        for (const auto &w : d.train) {
            sum += w.inputs.col(dim).sum();
            sq += w.inputs.col(dim).squaredNorm();
        }
        CHECK(std::abs(sum / 320.0) < 1e-9);
        CHECK(sq / 320.0 == doctest::Approx(1.0).epsilon(1e-9));
    }

    // Non-overlapping windows: no input row appears in two windows.
    std::set<std::array<double, 3>> rows;
    std::size_t total = 0;
    for (const auto *split : {&d.train, &d.validation, &d.test}) {
        for (const auto &w : *split) {
            for (Eigen::Index t = 0; t < w.inputs.rows(); ++t) {
                rows.insert({w.inputs(t, 0), w.inputs(t, 1), w.inputs(t, 2)});
                ++total;
            }
        }
    }
    CHECK(rows.size() == total);

    TrainConfig bad = cfg;
    bad.horizon = 0;
    CHECK_THROWS_AS(make_lorenz_dataset(bad), ConfigError);
}

TEST_CASE("metrics on hand-computed examples")
{
    Series y1(1, 3), y2(1, 3), p1(1, 3), p2(1, 3);
    y1 << 1, 2, 3;
    y2 << 3, 2, 1;
    p1 << 1, 2, 2;
    p2 << 2, 2, 2;
    const std::vector<Series> ys{y1, y2}, ps{p1, p2};
    // residuals (0,0,-1),(1,0,-1): SS_res 3 over 6 values; SS_tot about the
    // grand mean 2 is 4; prediction mean 11/6 gives SS_p 5/6 and cross term 1.
    const auto e = score_predictions(ps, ys, 10.0);
    CHECK(e.mse == doctest::Approx(0.5));
    CHECK(*e.r2 == doctest::Approx(0.25));
    CHECK(*e.corr == doctest::Approx(1.0 / std::sqrt(4.0 * 5.0 / 6.0)));
    CHECK(e.spikes_per_sample == 5.0);

    const auto perfect = score_predictions(ys, ys, 0.0);
    CHECK(perfect.mse == 0.0);
    CHECK(*perfect.r2 == 1.0);
    CHECK(*perfect.corr == doctest::Approx(1.0));

    const std::vector<Series> means{Series::Constant(1, 3, 2.0), Series::Constant(1, 3, 2.0)};
    const auto flat = score_predictions(means, ys, 0.0);
    CHECK(*flat.r2 == doctest::Approx(0.0));
    CHECK_FALSE(flat.corr.has_value());

    const auto undefined = score_predictions(ys, means, 0.0);
    CHECK_FALSE(undefined.r2.has_value());
    const auto j = to_json(undefined);
    CHECK(j["r2"].is_null());
    CHECK(j["r2_defined"] == false);

    CHECK_THROWS_AS(score_predictions(std::vector<Series>{}, std::vector<Series>{}, 0.0), DataError);
}

TEST_CASE("evaluate is pure and ablation disables nodes")
{
    const Circuit c = load_circuit(testutil::fixture("surrogate.json"));
    const GroupConfig gc = default_groups();
    const TrainConfig cfg = small_config();
    const LorenzDataset data = make_lorenz_dataset(cfg);
    const SNNModel m = build_model(c, gc, cfg);
    const auto a = evaluate(m, data.test), b = evaluate(m, data.test);
    CHECK(a.mse == b.mse);
    CHECK(a.spikes_per_sample == b.spikes_per_sample);
    CHECK(a.spikes_per_sample > 0.0);
    CHECK(*a.r2 <= 1.0);
    CHECK(std::abs(*a.corr) <= 1.0);

    const SNNModel ab = with_ablation(m, gc.resolve("ns_TIN"));
    const auto res = forward(ab, data.test[0].inputs);
    for (const auto &name : gc.resolve("ns_TIN")) {
        const auto k = static_cast<Eigen::Index>(c.require_index(name));
        CHECK(res.spikes.col(k).sum() == 0.0);
        CHECK(ab.circuit.matrix().row(k).sum() == 0.0);
        CHECK(ab.circuit.matrix().col(k).sum() == 0.0);
    }
    CHECK_THROWS_AS(evaluate(m, std::span<const LorenzWindow>{}), DataError);
}

TEST_CASE("free-running rollout")
{
    const Circuit c = load_circuit(testutil::fixture("surrogate.json"));
    const TrainConfig cfg = small_config();
    const LorenzDataset data = make_lorenz_dataset(cfg);
    const SNNModel m = build_model(c, default_groups(), cfg);
    const auto &x = data.test[0].inputs;
    const auto forced = forward(m, x);
    CHECK(rollout(m, x, static_cast<std::size_t>(x.rows())).prediction == forced.prediction);

    const auto free = rollout(m, x, 10);
    CHECK(free.prediction.topRows(10) == forced.prediction.topRows(10));
    CHECK_FALSE(free.prediction == forced.prediction);
}

TEST_CASE("non-finite state aborts with the step")
{
    const Circuit c = load_circuit(testutil::fixture("surrogate.json"));
    SNNModel m = build_model(c, default_groups(), TrainConfig{});
    m.readout_b[0] = INFINITY;
    try {
        forward(m, Series::Zero(5, 3));
        FAIL("expected a numeric error");
    } catch (const NumericError &e) {
        CHECK(std::string(e.what()).find("step 0") != std::string::npos);
    }
}

TEST_CASE("checkpoints round-trip")
{
    const Circuit c = load_circuit(testutil::fixture("surrogate.json"));
    TrainConfig cfg = small_config();
    cfg.coupling = 2.5;
    SNNModel m = with_ablation(build_model(c, default_groups(), cfg), {"e_ns_TIN"});
    Rng rng(21);
    randomise(rng, m, 0.4);

    const auto dir = testutil::scratch_dir("ckpt");
    save_model(m, cfg, dir / "m.json");
    TrainConfig cfg2;
    const SNNModel back = load_model(dir / "m.json", &cfg2);
    CHECK(to_json(cfg2) == to_json(cfg));
    CHECK(back.encoder_w == m.encoder_w);
    CHECK(back.log_gain == m.log_gain);
    CHECK(back.active == m.active);
    CHECK(back.circuit == m.circuit);
    CHECK(back.seed == m.seed);
    const Series x = random_series(rng, 30, 1.0);
    CHECK(forward(back, x).prediction == forward(m, x).prediction);

    const auto doc = model_to_json(m, cfg);
    CHECK(doc["arrays"].contains("recurrent.log_gain"));
    CHECK(doc["config"]["coupling"] == 2.5);

    testutil::write_file(dir / "bad.json", R"({"format": "something else"})");
    CHECK_THROWS_AS(load_model(dir / "bad.json"), DataError);
    CHECK_THROWS_AS(load_model(dir / "absent.json"), DataError);
}
