#pragma once

#include "fmc/smdp.hpp"

#include <span>

namespace fmc::kernels {

/// One Bellman backup over every state of the uniformized model:
///   next[s] = max_a { r~(s,a) + sum_s' p~(s'|s,a) values[s'] }
/// best[s] receives the maximizing choice index; ties go to the first
/// (lowest action code) choice. OpenMP-parallel over states; reads only
/// `values`, so the result is independent of the thread count.
void bellman_sweep(const DiscreteModel& m, std::span<const double> values,
                   std::span<double> next, std::span<int> best);

/// y = x P for the row-stochastic matrix selected by `choice` (one row per state).
void left_multiply(const DiscreteModel& m, std::span<const int> choice,
                   std::span<const double> x, std::span<double> y);

namespace serial {

/// Reference implementation of kernels::bellman_sweep.
void bellman_sweep(const DiscreteModel& m, std::span<const double> values,
                   std::span<double> next, std::span<int> best);

void left_multiply(const DiscreteModel& m, std::span<const int> choice,
                   std::span<const double> x, std::span<double> y);

} // namespace serial

/// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int thread_count();

} // namespace fmc::kernels
