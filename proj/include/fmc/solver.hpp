#pragma once

#include "fmc/smdp.hpp"

#include <memory>
#include <string>
#include <vector>

namespace fmc {

/// Stationary deterministic policy: one action per state index.
struct Policy {
    std::vector<Action> actions;

    const Action& operator[](int s) const { return actions[s]; }
    int size() const { return static_cast<int>(actions.size()); }
    bool operator==(const Policy&) const = default;
};

/// Maps each state's action to its choice index; throws ValidationError on an infeasible entry.
std::vector<int> policy_choices(const SmdpModel& m, const Policy& pol);

struct RviOptions {
    double tol = 1e-9;          ///< span-seminorm stopping threshold
    int max_iterations = 500'000;
    int reference_state = 0;
    bool parallel = true;
};

struct RviResult {
    Policy policy;
    std::vector<int> choice;
    double gain = 0.0;          ///< theta, per unit time
    std::vector<double> values; ///< relative values, values[reference] == 0
    int iterations = 0;
    double span = 0.0;
    double residual = 0.0;      ///< Bellman residual of (values, gain)
};

/// Relative value iteration on the uniformized model. `warm_start`, when
/// non-empty, seeds the value vector.
RviResult relative_value_iteration(const DiscreteModel& m, const RviOptions& opts = {},
                                   const std::vector<double>& warm_start = {});

/// max_s | max_a { r~ + p~ V } - V(s) - gain |
double bellman_residual(const DiscreteModel& m, const std::vector<double>& values, double gain);

/// Stationary distribution of the embedded (untransformed) chain under `pol`.
std::vector<double> steady_state(const SmdpModel& m, const Policy& pol);

/// Stationary distribution of the uniformized chain under `pol`.
std::vector<double> uniformized_steady_state(const DiscreteModel& m, const Policy& pol);

/// Stationary distribution of an arbitrary row-stochastic CSR matrix (rows = states).
std::vector<double> stationary_distribution(int n, const std::vector<int>& row_offsets,
                                            const std::vector<int>& columns,
                                            const std::vector<double>& values);

struct RejectionStats {
    double nr = 0.0;        ///< Pr[reject | NR arrival]
    double mr = 0.0;        ///< Pr[reject | MR arrival]; 0 when MRs never arrive
    double weighted = 0.0;  ///< sum_s pi(s) f(s, delta(s))
    double nr_mass = 0.0;   ///< Pr[e = An] under pi
    double mr_mass = 0.0;   ///< Pr[e = Am] under pi
};

RejectionStats rejection_probabilities(const std::vector<double>& pi, const Policy& pol,
                                       const SmdpModel& m);

/// Semi-Markov ratio sum pi r_beta / sum pi y over the embedded chain.
double policy_gain(const SmdpModel& m, const Policy& pol, double beta = 0.0);

/// sum pi~ r~ over the uniformized chain (uses the model's own beta).
double uniformized_gain(const DiscreteModel& m, const Policy& pol);

struct BruteForceResult {
    Policy policy;
    double gain = 0.0;
    std::size_t policies_enumerated = 0;
};

/// Exhaustive search over stationary deterministic policies.
BruteForceResult brute_force_optimal(const SmdpModel& m, double beta,
                                     int max_decision_states = 12);

enum class Termination {
    Tolerance,     ///< |p_r - rho| < eps
    Slack,         ///< beta = 0 and the constraint holds
    Bracket,       ///< beta located a jump of the step-shaped p_r(beta); feasible side returned
    IterationCap,  ///< cap reached; best feasible iterate returned
};

std::string to_string(Termination t);

struct LagrangeOptions {
    double rho = 0.1;
    double eps = 0.005;
    double alpha = 10.0;
    double beta_initial = 1.0;
    int max_iterations = 80;
    double beta_tol = 1e-6;      ///< relative beta movement treated as a located jump
    RviOptions rvi;
};

struct LagrangeStep {
    double beta = 0.0;
    double weighted = 0.0;
    double nr = 0.0;
    double mr = 0.0;
    double gain = 0.0;
    int rvi_iterations = 0;
};

struct LagrangeOutcome {
    RviResult rvi;
    double beta = 0.0;
    RejectionStats rejection;
    std::vector<double> stationary;
    std::vector<LagrangeStep> trace;
    Termination termination = Termination::Tolerance;
    bool converged = true;
};

/// Multiplier search: solve RVI at beta^n, evaluate the weighted rejection
/// probability, update beta^{n+1} = max(0, beta^n + (alpha/n)(p_r - rho)).
/// Throws InfeasibleConstraint when even the rejection-minimizing policy
/// violates rho + eps, SolverError when no feasible iterate is found.
LagrangeOutcome lagrangian_solve(DiscreteModel& m, const LagrangeOptions& opts,
                                 const std::vector<double>& warm_values = {});

/// Policy minimizing the long-run rejection rate (the beta -> infinity limit).
RviResult min_rejection_policy(const DiscreteModel& m, const RviOptions& opts = {});

struct FixedPointOptions {
    double damping = 0.5;       ///< kappa
    double tol = 1e-4;
    int max_iterations = 40;
    LagrangeOptions lagrange;
};

struct SolveOutcome {
    std::shared_ptr<const SmdpModel> model;
    Policy policy;
    double theta = 0.0;          ///< Lagrangian gain at beta
    double reward_gain = 0.0;    ///< unpenalized gain of the policy
    std::vector<double> values;
    double beta = 0.0;
    RejectionStats rejection;
    double p_reject_mr_model = 0.0;  ///< fixed-point value used to build the model
    DistanceStats stats;
    std::vector<LagrangeStep> beta_trace;
    std::vector<double> fixed_point_trace;
    Termination termination = Termination::Tolerance;
    bool lagrange_converged = true;
    bool fixed_point_converged = true;
    int rvi_iterations = 0;
    double rvi_residual = 0.0;
};

/// Builds the model for a given MR rejection probability.
std::shared_ptr<const SmdpModel> build_model(const ModelParams& p, const StateSpace& space,
                                             double p_reject_mr);

/// Damped fixed point on the MR rejection probability around lagrangian_solve.
SolveOutcome fixed_point_solve(const ModelParams& p, double rho,
                               const FixedPointOptions& opts = {});

} // namespace fmc
