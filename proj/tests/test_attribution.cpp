#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "tectum/attribution.hpp"
#include "tectum/errors.hpp"
#include "test_util.hpp"

using namespace tectum;

namespace {

constexpr double kBaselineMse = 0.9318;

AblationRecord reference_record(const std::string &group, double esi_x100, double rsi_value, bool input = false)
{
    AblationRecord r;
    r.group = group;
    r.mse_before = kBaselineMse;
    r.rsi = rsi_value;
    r.mse_after = kBaselineMse * (1.0 + rsi_value);
    r.delta_mse = r.mse_after - r.mse_before;
    r.esi = esi_x100 / 100.0;
    r.is_input_port = input;
    return r;
}

// Reference ESI column; ns_TIN's RSI follows from its quoted MSE increase,
// TPN_output's is only known to sit below the reference top five.
std::vector<AblationRecord> esi_table()
{
    return {reference_record("RGC_input", -30.88, 0.4251, true),
            reference_record("ns_TIN", -51.18, 0.1046 / kBaselineMse),
            reference_record("S12_group", -55.42, 0.7357),
            reference_record("TPN_output", -66.98, 0.30),
            reference_record("superficial_TIN", -73.11, 0.8705)};
}

std::vector<AblationRecord> rsi_table()
{
    return {reference_record("deep_TIN", 0, 0.4209), reference_record("SGC_group", 0, 0.3417),
            reference_record("RGC_input", 0, 0.4251), reference_record("superficial_TIN", 0, 0.8705),
            reference_record("S12_group", 0, 0.7357)};
}

std::vector<std::string> groups_of(const std::vector<AblationRecord> &rs)
{
    std::vector<std::string> out;
    for (const auto &r : rs) out.push_back(r.group);
    return out;
}

} // namespace

TEST_CASE("ESI from the quoted deltas")
{
    CHECK(esi(0.0, 42.0) == 0.0);
    CHECK(esi(0.0, -3.0, 1e-3) == 0.0);
    const double ns = 100.0 * esi(-5.8, percent_change(kBaselineMse + 0.1046, kBaselineMse));
    CHECK(std::abs(ns - (-51.7)) <= 1.0);
    CHECK(std::abs(ns - (-51.18)) <= 1.0);
    const double sup = 100.0 * esi(-63.7, percent_change(kBaselineMse + 0.8112, kBaselineMse));
    CHECK(std::abs(sup - (-73.2)) <= 0.2);
    CHECK(std::abs(sup - (-73.11)) <= 0.2);
    // Epsilon keeps the zero-error case finite.
    CHECK(esi(-10.0, 0.0, 1e-6) == doctest::Approx(-1e7));
}

TEST_CASE("RSI from the reference pairs")
{
    CHECK(rsi(0.5, 0.5) == 0.0);
    CHECK(std::abs(rsi(1.7430, kBaselineMse) - 0.8705) <= 1e-4);
    CHECK(std::abs(rsi(1.6174, kBaselineMse) - 0.7357) <= 1e-4);
    CHECK_THROWS_AS(rsi(1.0, 0.0), DataError);
    CHECK_THROWS_AS(rsi(1.0, -1.0), DataError);
}

TEST_CASE("index invariants on random inputs")
{
    Rng rng(5);
    for (int k = 0; k < 500; ++k) {
        const double a = rng.uniform(-100, 100), b = rng.uniform(-100, 100), eps = rng.uniform(1e-9, 1e-2);
        CHECK(std::abs(esi(-a, -b, eps)) == doctest::Approx(std::abs(esi(a, b, eps))));
        CHECK(esi(0.0, b, eps) == 0.0);
        const double after = rng.uniform(0.01, 5), base = rng.uniform(0.01, 5), scale = rng.uniform(0.01, 100);
        CHECK(rsi(scale * after, scale * base) == doctest::Approx(rsi(after, base)).epsilon(1e-12));
    }
}

TEST_CASE("ESI ranking reproduces the reference order")
{
    const auto recs = esi_table();
    const auto all = rank_esi(recs, false);
    CHECK(groups_of(all) ==
          std::vector<std::string>{"RGC_input", "ns_TIN", "S12_group", "TPN_output", "superficial_TIN"});
    const auto internal = rank_esi(recs, true);
    REQUIRE_FALSE(internal.empty());
    CHECK(internal.front().group == "ns_TIN");
    CHECK(internal.size() == 4);

    CHECK(groups_of(rank_esi(std::vector<AblationRecord>{recs[3]}, false)) == std::vector<std::string>{"TPN_output"});

    // Error-decreasing ablations never enter the ranking.
    auto better = recs[1];
    better.delta_mse = -0.01;
    CHECK(rank_esi(std::vector<AblationRecord>{better}, false).empty());
}

TEST_CASE("RSI ranking reproduces the reference order")
{
    CHECK(groups_of(rank_rsi(rsi_table())) ==
          std::vector<std::string>{"superficial_TIN", "S12_group", "RGC_input", "deep_TIN", "SGC_group"});

    std::vector<AblationRecord> ties{reference_record("b", 0, 0.2), reference_record("c", 0, 0.2),
                                     reference_record("a", 0, 0.2)};
    CHECK(groups_of(rank_rsi(ties)) == std::vector<std::string>{"a", "b", "c"});
    CHECK(rank_rsi(std::vector<AblationRecord>{}).empty());
}

TEST_CASE("rankings are subsets and stable under record removal")
{
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<AblationRecord> recs;
        const std::size_t n = 1 + rng.below(10);
        for (std::size_t k = 0; k < n; ++k) {
            auto r = reference_record("g" + std::to_string(k), rng.uniform(-100, 10), rng.uniform(-0.5, 1.0),
                                      rng.uniform() < 0.2);
            r.delta_mse = rng.uniform(-0.2, 0.5);
            recs.push_back(r);
        }
        for (bool excl : {false, true}) {
            const auto full = groups_of(rank_esi(recs, excl));
            for (const auto &g : full) {
                CHECK(std::any_of(recs.begin(), recs.end(), [&](const AblationRecord &r) { return r.group == g; }));
            }
            const std::size_t drop = rng.below(n);
            auto fewer = recs;
            fewer.erase(fewer.begin() + static_cast<long>(drop));
            auto expect = full;
            std::erase(expect, recs[drop].group);
            CHECK(groups_of(rank_esi(fewer, excl)) == expect);
        }
        const auto r = rank_rsi(recs);
        CHECK(r.size() == recs.size());
        for (std::size_t k = 1; k < r.size(); ++k) CHECK(r[k - 1].rsi >= r[k].rsi);
    }
}

TEST_CASE("dual-axis report")
{
    const GroupConfig gc = default_groups();
    const auto rep = dual_axis_report(esi_table(), gc);
    REQUIRE(rep.top_energy.has_value());
    CHECK(rep.top_energy->group == "ns_TIN");
    CHECK(rep.top_energy->nodes == 2);
    CHECK(rep.top_energy->index_value == doctest::Approx(-51.18));
    REQUIRE(rep.top_robustness.has_value());
    CHECK(rep.top_robustness->group == "superficial_TIN");
    CHECK(rep.top_robustness->nodes == 22);
    CHECK(rep.top_robustness->index_value == doctest::Approx(0.8705));

    const auto j = to_json(rep);
    CHECK(j["top_energy"]["group"] == "ns_TIN");
    CHECK(j["energy_axis_empty"] == false);
    CHECK(j["records"].size() == 5);
    const auto md = to_markdown(rep);
    CHECK(md.find("| Energy | ns_TIN | 2 | 100xESI = -51.18 |") != std::string::npos);
    CHECK(md.find("| Robustness | superficial_TIN | 22 | RSI = 0.8705 |") != std::string::npos);

    const auto one = dual_axis_report(std::vector<AblationRecord>{reference_record("deep_TIN", -40, 0.42)}, gc);
    CHECK(one.top_energy->group == "deep_TIN");
    CHECK(one.top_robustness->group == "deep_TIN");

    auto a = reference_record("ns_TIN", -10, -0.1), b = reference_record("deep_TIN", -20, -0.2);
    a.delta_mse = b.delta_mse = -0.05;
    const auto empty = dual_axis_report(std::vector<AblationRecord>{a, b}, gc);
    CHECK_FALSE(empty.top_energy.has_value());
    CHECK_FALSE(empty.energy_note.empty());
    CHECK(empty.error_decreasing.size() == 2);
    CHECK(to_json(empty)["energy_axis_empty"] == true);

    const auto only_input =
        dual_axis_report(std::vector<AblationRecord>{reference_record("RGC_input", -30, 0.4, true)}, gc);
    CHECK_FALSE(only_input.top_energy.has_value());
    CHECK(only_input.energy_note.find("input") != std::string::npos);

    CHECK_THROWS_AS(dual_axis_report(std::vector<AblationRecord>{}, gc), DataError);
}

TEST_CASE("records recompute and round-trip")
{
    const auto r = make_record("g", 3, 0.8, 1.0, 500.0, 400.0, false);
    CHECK(r.delta_mse == doctest::Approx(0.2));
    CHECK(r.delta_mse_pct == doctest::Approx(25.0));
    CHECK(r.delta_spike_pct == doctest::Approx(-20.0));
    CHECK(r.esi == doctest::Approx(-20.0 / (25.0 + 1e-6)));
    CHECK(r.rsi == doctest::Approx(0.25));
    CHECK_NOTHROW(check_record(r));

    auto tampered = r;
    tampered.rsi += 1e-9;
    CHECK_THROWS_AS(check_record(tampered), NumericError);

    const auto back = record_from_json(to_json(r));
    CHECK(to_json(back) == to_json(r));
    CHECK(to_json(r)["esi_x100"] == doctest::Approx(100.0 * r.esi));
    CHECK_THROWS_AS(record_from_json(nlohmann::json{{"group", "g"}}), DataError);
}

TEST_CASE("sweep matches direct evaluation and is order-preserving")
{
    const Circuit c = load_circuit(testutil::fixture("surrogate.json"));
    const GroupConfig gc = default_groups();
    TrainConfig cfg;
    cfg.horizon = 40;
    cfg.train_windows = 4;
    cfg.val_windows = 1;
    cfg.test_windows = 3;
    const LorenzDataset data = make_lorenz_dataset(cfg);
    const SNNModel m = build_model(c, gc, cfg);
    const std::vector<std::string> groups{"superficial_TIN", "RGC_input", "ns_TIN", "deep_TIN"};

    const auto recs = run_ablation_sweep(m, gc, data.test, groups);
    const auto base = evaluate(m, data.test);
    REQUIRE(recs.size() == groups.size());
    for (std::size_t k = 0; k < groups.size(); ++k) {
        CAPTURE(groups[k]);
        CHECK(recs[k].group == groups[k]);
        CHECK(recs[k].mse_before == base.mse);
        CHECK(recs[k].spikes_before == base.spikes_per_sample);
        const auto direct = evaluate(with_ablation(m, gc.resolve(groups[k])), data.test);
        CHECK(recs[k].mse_after == direct.mse);
        CHECK(recs[k].spikes_after == direct.spikes_per_sample);
        CHECK(recs[k].nodes == gc.resolve(groups[k]).size());
        CHECK_NOTHROW(check_record(recs[k]));
    }
    CHECK(recs[1].is_input_port);
    CHECK_FALSE(recs[0].is_input_port);

    const auto again = run_ablation_sweep(m, gc, data.test, groups);
    for (std::size_t k = 0; k < groups.size(); ++k) CHECK(to_json(again[k]) == to_json(recs[k]));

    CHECK(run_ablation_sweep(m, gc, data.test, {}).empty());

    try {
        run_ablation_sweep(m, gc, data.test, {"ns_TIN", "not_a_group"});
        FAIL("expected a data error");
    } catch (const DataError &e) {
        CHECK(std::string(e.what()).find("not_a_group") != std::string::npos);
    }
    CHECK_THROWS_AS(run_ablation_sweep(m, gc, data.test, groups, 0.0), ConfigError);
}

TEST_CASE("ablating a disconnected group leaves the error unchanged")
{
    Matrix a = Matrix::Zero(4, 4);
    a(1, 0) = 0.6; // in -> out
    a(0, 1) = 0.2;
    const Circuit c({"in", "out", "x", "y"}, a);
    GroupConfig gc;
    gc.add("RGC_input", {"in"}, PortKind::input);
    gc.add("TPN_output", {"out"}, PortKind::output);
    gc.add("island", {"x", "y"});
    TrainConfig cfg;
    cfg.horizon = 30;
    cfg.train_windows = 2;
    cfg.val_windows = 1;
    cfg.test_windows = 2;
    const LorenzDataset data = make_lorenz_dataset(cfg);
    const SNNModel m = build_model(c, gc, cfg);
    const auto recs = run_ablation_sweep(m, gc, data.test, {"island"});
    CHECK(recs[0].rsi == 0.0);
    CHECK(recs[0].delta_mse == 0.0);
    // The island still fires on tonic drive, so removing it saves spikes.
    CHECK(recs[0].delta_spike_pct < 0.0);
}
