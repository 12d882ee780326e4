#pragma once

#include "fmc/config.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fmc {

/// Service-distance chain over {0, 1, ..., D, T, Dr}. T (finished) and Dr
/// (interrupted) are absorbing; Dr is entered only from distance D.
class DistanceChain {
public:
    DistanceChain(int max_distance, std::vector<double> transition);

    int max_distance() const { return max_distance_; }
    int size() const { return max_distance_ + 3; }
    int finished_state() const { return max_distance_ + 1; }
    int interrupted_state() const { return max_distance_ + 2; }

    double at(int from, int to) const { return transition_[from * size() + to]; }
    const std::vector<double>& matrix() const { return transition_; }

    /// "0".."D", "T", "Dr"
    std::string label(int state) const;

private:
    int max_distance_;
    std::vector<double> transition_;  // row-major size() x size()
};

struct DistanceStats {
    /// by_distance[d] = Pr[d_c = d] for d = 0..D (expected-occupancy share)
    std::vector<double> by_distance;
    double mean_distance = 0.0;
    double p_interrupt = 0.0;

    int max_distance() const { return static_cast<int>(by_distance.size()) - 1; }
    double at(int d) const { return by_distance.at(d); }
    /// Pr[d_c = D], the occupancy at the boundary distance.
    double boundary() const { return by_distance.back(); }
};

/// Monte-Carlo estimate with per-quantity standard errors (lifetime-level
/// ratio estimator, so epochs within one lifetime are not treated as independent).
struct WalkEstimate {
    DistanceStats stats;
    std::vector<double> by_distance_se;
    double mean_distance_se = 0.0;
    double p_interrupt_se = 0.0;
    std::uint64_t n_services = 0;
};

DistanceChain build_distance_chain(const ModelParams& p, double p_reject_mr);

/// Absorbing-chain statistics from the fundamental matrix, starting at distance 0.
DistanceStats distance_statistics(const DistanceChain& chain);

WalkEstimate simulate_walk(const DistanceChain& chain, std::uint64_t seed,
                           std::uint64_t n_services);

/// CSV with a header of state labels; one row per state of the transition
/// matrix, followed by a "P_d" row holding the distance distribution.
std::string mobility_csv(const DistanceChain& chain, const DistanceStats& stats);

} // namespace fmc
