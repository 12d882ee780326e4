// Parallel kernels against their serial references on the default instance.

#include "fmc/kernels.hpp"
#include "fmc/sim.hpp"
#include "fmc/solver.hpp"

#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

using namespace fmc;

namespace {

const DiscreteModel& model() {
    static const DiscreteModel dm = [] {
        const ModelParams p;
        const auto m = build_model(p, StateSpace::enumerate(p), 0.2);
        return DiscreteModel::uniformize(m, choose_eta(*m), 1.0);
    }();
    return dm;
}

template <auto Sweep>
void bm_bellman(benchmark::State& st) {
    const DiscreteModel& m = model();
    const int n = m.num_states();
    std::vector<double> v(n), next(n);
    std::iota(v.begin(), v.end(), 0.0);
    std::vector<int> best(n);
    for (auto _ : st) {
        Sweep(m, v, next, best);
        benchmark::DoNotOptimize(next.data());
    }
    st.SetItemsProcessed(st.iterations() * m.base().num_choices());
}

template <auto Multiply>
void bm_left_multiply(benchmark::State& st) {
    const DiscreteModel& m = model();
    const int n = m.num_states();
    std::vector<int> choice(n);
    for (int s = 0; s < n; ++s) choice[s] = m.base().choice_begin(s);
    std::vector<double> x(n, 1.0 / n), y(n);
    for (auto _ : st) {
        Multiply(m, choice, x, y);
        benchmark::DoNotOptimize(y.data());
    }
    st.SetItemsProcessed(st.iterations() * n);
}

void bm_replications(benchmark::State& st) {
    const ModelParams p;
    static const PreparedPolicy prep = prepare_policy(parse_policy("fixed", p), p, rejection_threshold(p));
    SimConfig cfg;
    cfg.n_events = 100'000;
    cfg.n_replications = 8;
    cfg.parallel = st.range(0) != 0;
    for (auto _ : st) {
        const SimResult r = run_simulation(p, decision_rule(prep), cfg, prep.model->context().stats,
                                           prep.p_reject_mr);
        benchmark::DoNotOptimize(r.aggregate.avg_reward_per_time);
    }
    st.SetItemsProcessed(st.iterations() * cfg.n_events * cfg.n_replications);
}

} // namespace

BENCHMARK(bm_bellman<kernels::serial::bellman_sweep>)->Name("bellman_sweep/serial");
BENCHMARK(bm_bellman<kernels::bellman_sweep>)->Name("bellman_sweep/parallel")->UseRealTime();
BENCHMARK(bm_left_multiply<kernels::serial::left_multiply>)->Name("left_multiply/serial");
BENCHMARK(bm_left_multiply<kernels::left_multiply>)->Name("left_multiply/parallel")->UseRealTime();
BENCHMARK(bm_replications)->Name("replications")->Arg(0)->Arg(1)->UseRealTime()->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
