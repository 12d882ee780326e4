#include "fmc/compare.hpp"
#include "fmc/error.hpp"
#include "fmc/sim.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace fmc;

namespace {

DistanceStats stats_for(const ModelParams& p, double p_rm) {
    return distance_statistics(build_distance_chain(p, p_rm));
}

SimConfig quick(std::int64_t events = 200'000, int reps = 4) {
    SimConfig c;
    c.n_events = events;
    c.warmup_events = 5'000;
    c.n_replications = reps;
    return c;
}

const DecisionRule reject_all = [](const SystemState& s) {
    return s.event.is_arrival() ? Action::reject() : Action::observe();
};

} // namespace

TEST_CASE("always-reject reward matches the empty-system closed form") {
    ModelParams p;
    p.lambda_n = 1.5;
    const double p_rm = 0.4;
    const DistanceStats st = stats_for(p, p_rm);
    const double lm = mr_arrival_rate(p);
    const double expected = -(p.loss_reject_nr * p.lambda_n + p.loss_interrupt / 2 * st.boundary() * lm);
    REQUIRE(st.boundary() > 0.0);
    for (SimMode mode : {SimMode::Analytic, SimMode::Detailed}) {
        SimConfig c = quick(400'000, 8);
        c.mode = mode;
        const SimMetrics m = run_simulation(p, reject_all, c, st, p_rm).aggregate;
        CHECK(m.p_reject_nr == 1.0);
        CHECK(m.p_reject_mr == 1.0);
        CHECK(std::abs(m.avg_reward_per_time - expected) <= m.avg_reward_per_time_hw * 3 / 1.96 + 1e-12);
        CHECK(std::isnan(m.avg_alloc_nr));
        CHECK(m.avg_distance == 0.0);
    }
}

TEST_CASE("no movement: no distance, no interruptions") {
    ModelParams p;
    p.p_m = 0.0;
    p.lambda_n = 2.0;
    const SimMetrics m =
        run_simulation(p, all_units_rule(p), quick(), stats_for(p, 0.0), 0.0).aggregate;
    CHECK(m.mr_arrivals == 0);
    CHECK(m.avg_distance == 0.0);
    CHECK(m.interruption_rate == 0.0);
    CHECK(std::isnan(m.p_reject_mr));
}

TEST_CASE("simulation is deterministic and thread-count independent") {
    const ModelParams p;
    const DistanceStats st = stats_for(p, 0.3);
    SimConfig c = quick(50'000, 6);
    const auto rule = rrsv_rule(p, {1, 2});
    const SimResult a = run_simulation(p, rule, c, st, 0.3);
    const SimResult b = run_simulation(p, rule, c, st, 0.3);
    CHECK(a.aggregate == b.aggregate);
    CHECK(a.replications == b.replications);
    c.parallel = false;
    const SimResult serial = run_simulation(p, rule, c, st, 0.3);
    CHECK(serial.replications == a.replications);
    CHECK(serial.aggregate == a.aggregate);
    CHECK(run_replication(p, rule, c, st, 0.3, 2) == a.replications[2]);
    c.seed += 1;
    CHECK_FALSE(run_simulation(p, rule, c, st, 0.3).aggregate == a.aggregate);
}

TEST_CASE("NR inter-arrival times are exponential (Kolmogorov-Smirnov, alpha = 0.01)") {
    ModelParams p;
    p.lambda_n = 2.0;
    std::vector<double> times;
    SimConfig c = quick(150'000, 1);
    c.observer = [&](double t, const SystemState& s) {
        if (s.event.kind == EventKind::ArrivalNR) times.push_back(t);
    };
    run_replication(p, fixed_rule(p, {1}), c, stats_for(p, 0.2), 0.2, 0);
    std::vector<double> gaps;
    for (std::size_t i = 1; i < times.size(); ++i) gaps.push_back(times[i] - times[i - 1]);
    std::sort(gaps.begin(), gaps.end());
    const double n = static_cast<double>(gaps.size());
    REQUIRE(n > 20000);
    double d = 0.0;
    for (std::size_t i = 0; i < gaps.size(); ++i) {
        const double f = 1.0 - std::exp(-p.lambda_n * gaps[i]);
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    CHECK(d < 1.628 / std::sqrt(n));
}

TEST_CASE("an infeasible decision aborts with the offending state") {
    const ModelParams p;
    const DecisionRule greedy_units = [](const SystemState& s) {
        return s.event.is_arrival() ? Action::accept(3) : Action::observe();
    };
    try {
        run_replication(p, greedy_units, quick(10'000, 1), stats_for(p, 0.0), 0.0, 0);
        FAIL("expected SimulationAbort");
    } catch (const SimulationAbort& e) {
        CHECK(std::string(e.what()).find("infeasible action") != std::string::npos);
    }
}

TEST_CASE("config checks") {
    SimConfig c;
    c.warmup_events = c.n_events;
    CHECK_THROWS_AS(check_config(c), ValidationError);
    c = SimConfig{};
    c.n_replications = 0;
    CHECK_THROWS_AS(check_config(c), ValidationError);
    CHECK(parse_sim_mode("analytic") == SimMode::Analytic);
    CHECK(to_string(SimMode::Detailed) == "detailed");
    CHECK_THROWS_AS(parse_sim_mode("fast"), ValidationError);
}

TEST_CASE("aggregate: mean, 95% half-width, NaN-skipping") {
    std::vector<SimMetrics> reps(3);
    reps[0].avg_reward_per_time = 1.0;
    reps[1].avg_reward_per_time = 2.0;
    reps[2].avg_reward_per_time = 6.0;
    reps[0].avg_alloc_mr = NAN;
    reps[1].avg_alloc_mr = 2.0;
    reps[2].avg_alloc_mr = 4.0;
    reps[0].nr_arrivals = 5;
    reps[2].nr_arrivals = 7;
    const SimMetrics a = aggregate(reps);
    CHECK(a.avg_reward_per_time == doctest::Approx(3.0));
    CHECK(a.avg_reward_per_time_hw == doctest::Approx(1.96 * std::sqrt(7.0 / 3.0)));
    CHECK(a.avg_alloc_mr == doctest::Approx(3.0));
    CHECK(a.nr_arrivals == 12);
}

TEST_CASE("reservation lowers MR rejection relative to the same fixed allocation") {
    const ModelParams p;
    const DistanceStats st = stats_for(p, 0.2);
    const SimConfig c = quick(200'000, 4);
    const SimMetrics r = run_simulation(p, rrsv_rule(p, {1, 2}), c, st, 0.2).aggregate;
    const SimMetrics f = run_simulation(p, fixed_rule(p, {2}), c, st, 0.2).aggregate;
    CHECK(r.p_reject_mr <= f.p_reject_mr);
    CHECK(r.p_reject_nr >= f.p_reject_nr);
}

TEST_CASE("analytic-cost simulator agrees with the model for a baseline") {
    ModelParams p;
    p.lambda_n = 2.0;
    const PreparedPolicy prep = prepare_policy(parse_policy("fixed", p), p, rejection_threshold(p));
    SimConfig c = quick(260'000, 4);
    for (const Check& chk : simulation_checks(p, prep, c)) {
        INFO(chk.name << ": " << chk.detail);
        CHECK(chk.passed);
    }
}

TEST_CASE("sweep rows, columns and failure isolation") {
    ModelParams p;
    SweepConfig cfg;
    cfg.lambdas = {1.0};
    cfg.policies = {AllUnitsSpec{}};
    cfg.sim = quick(20'000, 2);
    const auto rows = sweep(p, cfg);
    CHECK(rows.size() == 3);
    CHECK(std::count_if(rows.begin(), rows.end(), [](const SweepRow& r) { return r.replication < 0; }) == 1);

    const std::string csv = sweep_csv(rows);
    const std::string header = csv.substr(0, csv.find('\n'));
    CHECK(header ==
          "lambda_n,policy,replication,avg_reward_per_time,p_reject_nr,p_reject_mr,avg_alloc_nr,"
          "avg_alloc_mr,avg_distance,interruption_rate,avg_reward_per_time_hw,p_reject_nr_hw,"
          "p_reject_mr_hw,avg_alloc_nr_hw,avg_alloc_mr_hw,avg_distance_hw,interruption_rate_hw,"
          "p_reject_mr_model,analytic_gain,status");
    CHECK(sweep_columns().size() == 20);
    CHECK(csv == sweep_csv(sweep(p, cfg)));
    CHECK(csv.find(",all,") != std::string::npos);

    // One infeasible cell does not stop the others.
    ModelParams tiny;
    tiny.capacity_B = 1;
    tiny.max_alloc_C = 1;
    SweepConfig bad;
    bad.lambdas = {4.0};
    bad.policies = {SmdpSpec{}, AllUnitsSpec{}};
    bad.sim = quick(20'000, 2);
    bad.rho = 0.0;
    const auto mixed = sweep(tiny, bad);
    int failed = 0, ok = 0;
    for (const auto& r : mixed)
        if (r.replication < 0) (r.status == "ok" ? ok : failed) += 1;
    CHECK(failed == 1);
    CHECK(ok == 1);

    const auto json = nlohmann::json::parse(sweep_json(rows));
    CHECK(json.is_array());
    CHECK(json.size() == 3);

    SweepConfig empty = cfg;
    empty.lambdas.clear();
    CHECK_THROWS_AS(sweep(p, empty), ValidationError);
    empty.lambdas = {-1.0};
    CHECK_THROWS_AS(sweep(p, empty), ValidationError);
}
