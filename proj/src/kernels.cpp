#include "fmc/kernels.hpp"

#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fmc::kernels {

namespace {

inline void backup_state(const DiscreteModel& m, int s, std::span<const double> values,
                         std::span<double> next, std::span<int> best) {
    const SmdpModel& base = m.base();
    const auto& offsets = m.row_offsets();
    const auto& cols = m.columns();
    const auto& vals = m.values();

    double best_q = -std::numeric_limits<double>::infinity();
    int best_k = -1;
    for (int k = base.choice_begin(s); k < base.choice_end(s); ++k) {
        double q = m.reward(k);
        for (int j = offsets[k]; j < offsets[k + 1]; ++j) q += vals[j] * values[cols[j]];
        if (q > best_q) {
            best_q = q;
            best_k = k;
        }
    }
    next[s] = best_q;
    best[s] = best_k;
}

} // namespace

void bellman_sweep(const DiscreteModel& m, std::span<const double> values,
                   std::span<double> next, std::span<int> best) {
    const int M = m.num_states();
#pragma omp parallel for schedule(static)
    for (int s = 0; s < M; ++s) backup_state(m, s, values, next, best);
}

void left_multiply(const DiscreteModel& m, std::span<const int> choice,
                   std::span<const double> x, std::span<double> y) {
    const int M = m.num_states();
    const auto& offsets = m.row_offsets();
    const auto& cols = m.columns();
    const auto& vals = m.values();
    std::fill(y.begin(), y.end(), 0.0);

#ifdef _OPENMP
    // Scatter into per-thread buffers, then reduce in a fixed thread order.
    const int nt = omp_get_max_threads();
    if (nt > 1) {
        std::vector<std::vector<double>> partial(nt, std::vector<double>(M, 0.0));
#pragma omp parallel
        {
            auto& acc = partial[omp_get_thread_num()];
#pragma omp for schedule(static)
            for (int s = 0; s < M; ++s) {
                const int k = choice[s];
                for (int j = offsets[k]; j < offsets[k + 1]; ++j) acc[cols[j]] += x[s] * vals[j];
            }
        }
        for (const auto& acc : partial)
            for (int s = 0; s < M; ++s) y[s] += acc[s];
        return;
    }
#endif
    serial::left_multiply(m, choice, x, y);
}

namespace serial {

void bellman_sweep(const DiscreteModel& m, std::span<const double> values,
                   std::span<double> next, std::span<int> best) {
    for (int s = 0; s < m.num_states(); ++s) backup_state(m, s, values, next, best);
}

void left_multiply(const DiscreteModel& m, std::span<const int> choice,
                   std::span<const double> x, std::span<double> y) {
    const auto& offsets = m.row_offsets();
    const auto& cols = m.columns();
    const auto& vals = m.values();
    std::fill(y.begin(), y.end(), 0.0);
    for (int s = 0; s < m.num_states(); ++s) {
        const int k = choice[s];
        for (int j = offsets[k]; j < offsets[k + 1]; ++j) y[cols[j]] += x[s] * vals[j];
    }
}

} // namespace serial

int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

} // namespace fmc::kernels
