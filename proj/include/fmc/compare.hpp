#pragma once

#include "fmc/sim.hpp"

#include <string>
#include <vector>

namespace fmc {

struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct CompareOptions {
    PolicySpec policy = SmdpSpec{};
    double rho = -1.0;           ///< negative: derive from the parameters
    SimConfig sim;               ///< mode is forced to Analytic
    FixedPointOptions solve;
    double reward_rel_tol = 0.02;
    double reject_sigmas = 3.0;
    /// Corrupts one kernel entry after solving (fault-injection hook).
    bool inject_fault = false;
    /// Brute-force check is added when the instance has at most this many decision states.
    int brute_force_limit = 12;
};

/// Analytic-vs-simulated consistency suite for one policy.
std::vector<Check> consistency_checks(const ModelParams& p, const CompareOptions& opts);

/// Simulated reward and conditional rejection probabilities against the
/// analytic model of a prepared policy (analytic-cost simulator).
std::vector<Check> simulation_checks(const ModelParams& p, const PreparedPolicy& prepared,
                                     const SimConfig& cfg, double reward_rel_tol = 0.02,
                                     double reject_sigmas = 3.0);

} // namespace fmc
