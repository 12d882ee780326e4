#pragma once

#include "fmc/smdp.hpp"
#include "fmc/solver.hpp"

#include <functional>
#include <string>
#include <variant>

namespace fmc {

/// A closed-form decision rule consulted at each epoch.
using DecisionRule = std::function<Action(const SystemState&)>;

struct SmdpSpec {};
struct GreedySpec {};
struct AllUnitsSpec {};
struct FixedSpec {
    int units = 2;
};
struct ReserveSpec {
    int reserve = 1;
    int units = 2;
};

using PolicySpec = std::variant<SmdpSpec, GreedySpec, AllUnitsSpec, FixedSpec, ReserveSpec>;

/// Parses "smdp", "greedy", "au", "fixed:<c>", "rrsv:<R>,<c>", plus the
/// parameter-free forms "fixed" and "rrsv" which take defaults from `p`.
PolicySpec parse_policy(const std::string& text, const ModelParams& p);
std::string policy_name(const PolicySpec& spec);

/// Default fixed allocation: 2 units (1 if C = 1).
int default_fixed_units(const ModelParams& p);
/// Default reservation: ceil(0.1 B).
int default_reserve(const ModelParams& p);

/// Throws ValidationError if the spec's parameters are out of range for p.
void check_spec(const PolicySpec& spec, const ModelParams& p);

DecisionRule all_units_rule(const ModelParams& p);
DecisionRule fixed_rule(const ModelParams& p, FixedSpec spec);
DecisionRule rrsv_rule(const ModelParams& p, ReserveSpec spec);

/// Per state: argmax of the one-step transformed reward r~ with beta = 0.
Policy greedy_rule(const DiscreteModel& m);
Policy greedy_rule(const SmdpModel& m);

/// Tabulates a decision rule over the state space (non-arrival states get Observe).
Policy materialize(const DecisionRule& rule, const StateSpace& space);

/// Looks up a materialized policy by state.
DecisionRule rule_from_policy(std::shared_ptr<const Policy> pol,
                              std::shared_ptr<const StateSpace> space);

/// Materialized baseline for a model (greedy depends on the model's rewards).
Policy baseline_policy(const PolicySpec& spec, const SmdpModel& m);

struct BaselineFixedPoint {
    std::shared_ptr<const SmdpModel> model;
    Policy policy;
    RejectionStats rejection;
    double p_reject_mr = 0.0;
    double gain = 0.0;
    std::vector<double> trace;
    bool converged = false;
};

/// Symmetric-neighbour fixed point for a baseline: the MR rejection
/// probability that parameterizes the model equals the one the baseline
/// itself produces.
BaselineFixedPoint baseline_fixed_point(const PolicySpec& spec, const ModelParams& p,
                                        const FixedPointOptions& opts = {});

} // namespace fmc
