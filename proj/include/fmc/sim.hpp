#pragma once

#include "fmc/policies.hpp"
#include "fmc/solver.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace fmc {

/// Analytic: count dynamics identical to the SMDP kernel, remote services
/// charged at the mean distance, move incomes at their expected value.
/// Detailed: per-service distances follow the six-direction walk, services
/// past D are interrupted and charged C_d, incomes are realized.
enum class SimMode { Analytic, Detailed };

std::string to_string(SimMode m);
SimMode parse_sim_mode(const std::string& s);

struct SimConfig {
    std::uint64_t seed = 20161015;
    std::int64_t n_events = 1'000'000;     ///< epochs per replication, warmup included
    std::int64_t warmup_events = 10'000;
    int n_replications = 10;
    SimMode mode = SimMode::Detailed;
    bool parallel = true;                  ///< run replications on OpenMP threads
    /// Called at every arrival decision with the simulation clock (warmup included).
    std::function<void(double, const SystemState&)> observer;
};

void check_config(const SimConfig& cfg);

struct ServiceRecord {
    enum class Kind : std::uint8_t { Local, Remote };
    enum class Origin : std::uint8_t { NewRequest, Migration };
    Kind kind = Kind::Local;
    int alloc = 1;
    int distance = 0;
    Origin origin = Origin::NewRequest;
};

struct SimMetrics {
    double avg_reward_per_time = 0.0;
    double p_reject_nr = 0.0;
    double p_reject_mr = 0.0;
    double avg_alloc_nr = 0.0;
    double avg_alloc_mr = 0.0;
    double avg_distance = 0.0;
    double interruption_rate = 0.0;

    // 95% normal-approximation half-widths across replications (0 for a single one).
    double avg_reward_per_time_hw = 0.0;
    double p_reject_nr_hw = 0.0;
    double p_reject_mr_hw = 0.0;
    double avg_alloc_nr_hw = 0.0;
    double avg_alloc_mr_hw = 0.0;
    double avg_distance_hw = 0.0;
    double interruption_rate_hw = 0.0;

    // Raw post-warmup counters, summed over replications in an aggregate.
    std::uint64_t nr_arrivals = 0;
    std::uint64_t nr_rejected = 0;
    std::uint64_t mr_arrivals = 0;
    std::uint64_t mr_rejected = 0;
    std::uint64_t interruptions = 0;
    double elapsed = 0.0;

    bool operator==(const SimMetrics&) const = default;
};

struct SimResult {
    std::vector<SimMetrics> replications;
    SimMetrics aggregate;
};

/// One replication on stream `replication` of the master seed.
SimMetrics run_replication(const ModelParams& p, const DecisionRule& rule, const SimConfig& cfg,
                           const DistanceStats& stats, double p_reject_mr, int replication);

SimResult run_simulation(const ModelParams& p, const DecisionRule& rule, const SimConfig& cfg,
                         const DistanceStats& stats, double p_reject_mr);

/// Mean and half-width fold over replications in index order.
SimMetrics aggregate(const std::vector<SimMetrics>& reps);

/// A policy ready to simulate: its table, the model at its MR-rejection
/// fixed point, and the analytic figures for that model.
struct PreparedPolicy {
    PolicySpec spec;
    std::shared_ptr<const SmdpModel> model;
    std::shared_ptr<const Policy> policy;
    double p_reject_mr = 0.0;
    double analytic_gain = 0.0;  ///< beta = 0 semi-Markov gain
    RejectionStats analytic_rejection;
    bool converged = true;
    double beta = 0.0;           ///< SMDP only
};

PreparedPolicy prepare_policy(const PolicySpec& spec, const ModelParams& p, double rho,
                              const FixedPointOptions& opts = {});

DecisionRule decision_rule(const PreparedPolicy& prepared);

struct SweepConfig {
    std::vector<double> lambdas;
    std::vector<PolicySpec> policies;
    SimConfig sim;
    FixedPointOptions solve;
    /// rho; negative means "derive from the parameters".
    double rho = -1.0;
};

struct SweepRow {
    double lambda_n = 0.0;
    std::string policy;
    int replication = -1;  ///< -1 for the aggregated row
    SimMetrics metrics;
    double p_reject_mr_model = 0.0;
    double analytic_gain = 0.0;
    std::string status = "ok";
};

/// Every (lambda_n, policy) cell; a failing cell yields a row with its error
/// in `status` and the sweep continues.
std::vector<SweepRow> sweep(const ModelParams& p, const SweepConfig& cfg);

/// Fixed column set, documented in the README.
std::vector<std::string> sweep_columns();
std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string sweep_json(const std::vector<SweepRow>& rows);

} // namespace fmc
