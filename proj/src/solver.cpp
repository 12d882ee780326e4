#include "fmc/solver.hpp"

#include "fmc/error.hpp"
#include "fmc/kernels.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace fmc {

std::vector<int> policy_choices(const SmdpModel& m, const Policy& pol) {
    if (pol.size() != m.num_states())
        throw ValidationError("policy size does not match the state space");
    std::vector<int> choice(m.num_states());
    for (int s = 0; s < m.num_states(); ++s) {
        choice[s] = m.find_choice(s, pol[s]);
        if (choice[s] < 0)
            throw ValidationError("policy assigns infeasible action " + pol[s].label() +
                                  " to state " + m.space()[s].label());
    }
    return choice;
}

namespace {

Policy policy_from_choices(const SmdpModel& m, const std::vector<int>& choice) {
    Policy pol;
    pol.actions.reserve(choice.size());
    for (int k : choice) pol.actions.push_back(m.choice(k).action);
    return pol;
}

} // namespace

// ---------------------------------------------------------------------------
// Relative value iteration

RviResult relative_value_iteration(const DiscreteModel& m, const RviOptions& opts,
                                   const std::vector<double>& warm_start) {
    const int M = m.num_states();
    if (!(opts.tol > 0.0)) throw ValidationError("RVI tolerance must be > 0");
    if (opts.reference_state < 0 || opts.reference_state >= M)
        throw ValidationError("RVI reference state out of range");

    std::vector<double> values =
        warm_start.size() == static_cast<std::size_t>(M) ? warm_start : std::vector<double>(M, 0.0);
    std::vector<double> next(M);
    std::vector<int> best(M);

    RviResult out;
    bool converged = false;
    for (int it = 1; it <= opts.max_iterations; ++it) {
        if (opts.parallel)
            kernels::bellman_sweep(m, values, next, best);
        else
            kernels::serial::bellman_sweep(m, values, next, best);

        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (int s = 0; s < M; ++s) {
            const double d = next[s] - values[s];
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
        const double ref = next[opts.reference_state];
        for (int s = 0; s < M; ++s) values[s] = next[s] - ref;

        out.iterations = it;
        out.span = hi - lo;
        out.gain = 0.5 * (hi + lo);
        if (out.span < opts.tol) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw SolverError("relative value iteration did not converge in " +
                          std::to_string(opts.max_iterations) + " sweeps (span " +
                          std::to_string(out.span) + "); the model may not be unichain");

    out.choice = std::move(best);
    out.policy = policy_from_choices(m.base(), out.choice);
    out.values = std::move(values);
    out.residual = bellman_residual(m, out.values, out.gain);
    return out;
}

double bellman_residual(const DiscreteModel& m, const std::vector<double>& values, double gain) {
    const int M = m.num_states();
    std::vector<double> next(M);
    std::vector<int> best(M);
    kernels::bellman_sweep(m, values, next, best);
    double r = 0.0;
    for (int s = 0; s < M; ++s) r = std::max(r, std::abs(next[s] - values[s] - gain));
    return r;
}

// ---------------------------------------------------------------------------
// Stationary distributions

namespace {

double stationary_residual(int n, const std::vector<int>& offsets, const std::vector<int>& cols,
                           const std::vector<double>& vals, const std::vector<double>& pi) {
    std::vector<double> y(n, 0.0);
    for (int s = 0; s < n; ++s)
        for (int j = offsets[s]; j < offsets[s + 1]; ++j) y[cols[j]] += pi[s] * vals[j];
    double r = 0.0;
    for (int s = 0; s < n; ++s) r = std::max(r, std::abs(y[s] - pi[s]));
    return r;
}

void normalize(std::vector<double>& pi) {
    double total = 0.0;
    for (double& x : pi) {
        if (x < 0.0) x = 0.0;
        total += x;
    }
    for (double& x : pi) x /= total;
}

// Damped power iteration on (P + I) / 2, which removes periodicity.
std::vector<double> power_iteration(int n, const std::vector<int>& offsets,
                                    const std::vector<int>& cols, const std::vector<double>& vals) {
    std::vector<double> pi(n, 1.0 / n), y(n);
    for (int it = 0; it < 2'000'000; ++it) {
        std::fill(y.begin(), y.end(), 0.0);
        for (int s = 0; s < n; ++s)
            for (int j = offsets[s]; j < offsets[s + 1]; ++j) y[cols[j]] += pi[s] * vals[j];
        double change = 0.0;
        for (int s = 0; s < n; ++s) {
            const double v = 0.5 * (y[s] + pi[s]);
            change = std::max(change, std::abs(v - pi[s]));
            pi[s] = v;
        }
        if (change < 1e-15) break;
    }
    normalize(pi);
    return pi;
}

constexpr double kStationaryTolerance = 1e-10;

} // namespace

std::vector<double> stationary_distribution(int n, const std::vector<int>& offsets,
                                            const std::vector<int>& cols,
                                            const std::vector<double>& vals) {
    if (n == 1) return {1.0};

    // Solve pi (P - I) = 0 with the last balance equation replaced by sum(pi) = 1.
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(cols.size() + 2 * static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) {
        for (int j = offsets[s]; j < offsets[s + 1]; ++j)
            if (cols[j] != n - 1) triplets.emplace_back(cols[j], s, vals[j]);
        if (s != n - 1) triplets.emplace_back(s, s, -1.0);
        triplets.emplace_back(n - 1, s, 1.0);
    }
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();

    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(a);
    lu.factorize(a);

    std::vector<double> pi;
    if (lu.info() == Eigen::Success) {
        Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
        b(n - 1) = 1.0;
        const Eigen::VectorXd x = lu.solve(b);
        if (lu.info() == Eigen::Success && x.allFinite()) {
            pi.assign(x.data(), x.data() + n);
            normalize(pi);
            if (stationary_residual(n, offsets, cols, vals, pi) < kStationaryTolerance) return pi;
        }
    }

    pi = power_iteration(n, offsets, cols, vals);
    const double res = stationary_residual(n, offsets, cols, vals, pi);
    if (res > 1e3 * kStationaryTolerance)
        throw SolverError("stationary distribution did not converge (residual " +
                          std::to_string(res) + "); chain may be reducible");
    return pi;
}

std::vector<double> steady_state(const SmdpModel& m, const Policy& pol) {
    const auto choice = policy_choices(m, pol);
    const int n = m.num_states();
    std::vector<int> offsets{0};
    std::vector<int> cols;
    std::vector<double> vals;
    for (int s = 0; s < n; ++s) {
        const auto succ = m.successors(choice[s]);
        const auto prob = m.probabilities(choice[s]);
        cols.insert(cols.end(), succ.begin(), succ.end());
        vals.insert(vals.end(), prob.begin(), prob.end());
        offsets.push_back(static_cast<int>(cols.size()));
    }
    return stationary_distribution(n, offsets, cols, vals);
}

std::vector<double> uniformized_steady_state(const DiscreteModel& m, const Policy& pol) {
    const auto choice = policy_choices(m.base(), pol);
    const int n = m.num_states();
    std::vector<int> offsets{0};
    std::vector<int> cols;
    std::vector<double> vals;
    for (int s = 0; s < n; ++s) {
        const auto succ = m.successors(choice[s]);
        const auto prob = m.probabilities(choice[s]);
        cols.insert(cols.end(), succ.begin(), succ.end());
        vals.insert(vals.end(), prob.begin(), prob.end());
        offsets.push_back(static_cast<int>(cols.size()));
    }
    return stationary_distribution(n, offsets, cols, vals);
}

RejectionStats rejection_probabilities(const std::vector<double>& pi, const Policy& pol,
                                       const SmdpModel& m) {
    RejectionStats r;
    double nr_rejected = 0.0, mr_rejected = 0.0;
    const auto& params = m.context().params;
    for (int s = 0; s < m.num_states(); ++s) {
        const auto& state = m.space()[s];
        r.weighted += pi[s] * constraint_value(state, pol[s], params);
        if (state.event.kind == EventKind::ArrivalNR) {
            r.nr_mass += pi[s];
            if (pol[s].is_reject()) nr_rejected += pi[s];
        } else if (state.event.kind == EventKind::ArrivalMR) {
            r.mr_mass += pi[s];
            if (pol[s].is_reject()) mr_rejected += pi[s];
        }
    }
    if (!(r.nr_mass > 0.0))
        throw SolverError("NR arrival events carry zero stationary mass");
    r.nr = nr_rejected / r.nr_mass;
    r.mr = r.mr_mass > 0.0 ? mr_rejected / r.mr_mass : 0.0;
    return r;
}

double policy_gain(const SmdpModel& m, const Policy& pol, double beta) {
    const auto pi = steady_state(m, pol);
    const auto choice = policy_choices(m, pol);
    double num = 0.0, den = 0.0;
    for (int s = 0; s < m.num_states(); ++s) {
        const auto& c = m.choice(choice[s]);
        num += pi[s] * (c.reward - beta * c.constraint);
        den += pi[s] * c.sojourn;
    }
    return num / den;
}

double uniformized_gain(const DiscreteModel& m, const Policy& pol) {
    const auto pi = uniformized_steady_state(m, pol);
    const auto choice = policy_choices(m.base(), pol);
    double g = 0.0;
    for (int s = 0; s < m.num_states(); ++s) g += pi[s] * m.reward(choice[s]);
    return g;
}

BruteForceResult brute_force_optimal(const SmdpModel& m, double beta, int max_decision_states) {
    std::vector<int> decision;
    Policy pol;
    for (int s = 0; s < m.num_states(); ++s) {
        pol.actions.push_back(m.choice(m.choice_begin(s)).action);
        if (m.choice_end(s) - m.choice_begin(s) > 1) decision.push_back(s);
    }
    if (static_cast<int>(decision.size()) > max_decision_states)
        throw ValidationError("instance too large for brute force: " +
                              std::to_string(decision.size()) + " decision states");

    BruteForceResult best;
    best.gain = -std::numeric_limits<double>::infinity();
    std::vector<int> digit(decision.size(), 0);
    while (true) {
        for (std::size_t i = 0; i < decision.size(); ++i)
            pol.actions[decision[i]] = m.choice(m.choice_begin(decision[i]) + digit[i]).action;
        const double g = policy_gain(m, pol, beta);
        ++best.policies_enumerated;
        if (g > best.gain) {
            best.gain = g;
            best.policy = pol;
        }
        std::size_t i = 0;
        for (; i < decision.size(); ++i) {
            const int radix = m.choice_end(decision[i]) - m.choice_begin(decision[i]);
            if (++digit[i] < radix) break;
            digit[i] = 0;
        }
        if (i == decision.size()) break;
    }
    return best;
}

// ---------------------------------------------------------------------------
// Multiplier search

std::string to_string(Termination t) {
    switch (t) {
    case Termination::Tolerance: return "tolerance";
    case Termination::Slack: return "slack";
    case Termination::Bracket: return "bracket";
    case Termination::IterationCap: return "iteration_cap";
    }
    return "?";
}

RviResult min_rejection_policy(const DiscreteModel& m, const RviOptions& opts) {
    DiscreteModel probe = m;
    const SmdpModel& base = m.base();
    std::vector<double> r(base.num_choices());
    for (int k = 0; k < base.num_choices(); ++k)
        r[k] = -base.choice(k).constraint / base.choice(k).sojourn;
    probe.set_rewards(std::move(r));
    return relative_value_iteration(probe, opts);
}

LagrangeOutcome lagrangian_solve(DiscreteModel& m, const LagrangeOptions& opts,
                                 const std::vector<double>& warm_values) {
    if (!(opts.rho >= 0.0 && opts.rho <= 1.0)) throw ValidationError("rho must lie in [0,1]");
    if (!(opts.eps > 0.0)) throw ValidationError("eps must be > 0");
    if (!(opts.alpha > 0.0)) throw ValidationError("alpha must be > 0");

    const SmdpModel& base = m.base();
    double beta = std::max(0.0, opts.beta_initial);
    double alpha = opts.alpha;
    double prev_delta = std::numeric_limits<double>::quiet_NaN();
    bool flipped = false;
    std::vector<double> warm = warm_values;

    LagrangeOutcome out;
    std::optional<LagrangeOutcome> best_feasible;

    auto snapshot = [&](RviResult rvi, const RejectionStats& rej, std::vector<double> pi) {
        LagrangeOutcome o;
        o.rvi = std::move(rvi);
        o.beta = beta;
        o.rejection = rej;
        o.stationary = std::move(pi);
        return o;
    };

    for (int n = 1; n <= opts.max_iterations; ++n) {
        m.set_beta(beta);
        RviResult rvi = relative_value_iteration(m, opts.rvi, warm);
        warm = rvi.values;
        auto pi = steady_state(base, rvi.policy);
        const RejectionStats rej = rejection_probabilities(pi, rvi.policy, base);
        out.trace.push_back({beta, rej.weighted, rej.nr, rej.mr, rvi.gain, rvi.iterations});

        const double delta = rej.weighted - opts.rho;
        const bool feasible = rej.weighted <= opts.rho + opts.eps;

        if (std::abs(delta) < opts.eps || (beta == 0.0 && delta <= 0.0)) {
            auto trace = std::move(out.trace);
            out = snapshot(std::move(rvi), rej, std::move(pi));
            out.trace = std::move(trace);
            out.termination =
                std::abs(delta) < opts.eps ? Termination::Tolerance : Termination::Slack;
            m.set_beta(out.beta);
            return out;
        }

        if (n == 1 && delta > 0.0) {
            const RviResult probe = min_rejection_policy(m, opts.rvi);
            const auto probe_pi = steady_state(base, probe.policy);
            const double floor = rejection_probabilities(probe_pi, probe.policy, base).weighted;
            if (floor > opts.rho + opts.eps)
                throw InfeasibleConstraint(
                    "infeasible constraint: the lowest achievable weighted rejection "
                    "probability " + std::to_string(floor) + " exceeds rho " +
                    std::to_string(opts.rho));
        }

        if (feasible && (!best_feasible || beta < best_feasible->beta))
            best_feasible = snapshot(rvi, rej, pi);

        if (n >= 2 && std::signbit(delta) != std::signbit(prev_delta)) {
            alpha *= 0.5;
            flipped = true;
        } else if (!flipped && n >= 2) {
            alpha *= 2.0;
        }
        prev_delta = delta;

        const double next = std::max(0.0, beta + alpha / n * delta);
        if (flipped && best_feasible &&
            std::abs(next - beta) <= opts.beta_tol * std::max(1.0, beta)) {
            auto trace = std::move(out.trace);
            out = std::move(*best_feasible);
            out.trace = std::move(trace);
            out.termination = Termination::Bracket;
            m.set_beta(out.beta);
            return out;
        }
        beta = next;
    }

    if (!best_feasible) {
        std::string history;
        for (const auto& s : out.trace)
            history += " (beta=" + std::to_string(s.beta) + ", p_r=" + std::to_string(s.weighted) + ")";
        throw SolverError("multiplier search did not converge within " +
                          std::to_string(opts.max_iterations) + " iterations:" + history);
    }
    auto trace = std::move(out.trace);
    out = std::move(*best_feasible);
    out.trace = std::move(trace);
    out.termination = Termination::IterationCap;
    out.converged = false;
    m.set_beta(out.beta);
    return out;
}

// ---------------------------------------------------------------------------
// Fixed point on the MR rejection probability

std::shared_ptr<const SmdpModel> build_model(const ModelParams& p, const StateSpace& space,
                                             double p_reject_mr) {
    const auto stats = distance_statistics(build_distance_chain(p, p_reject_mr));
    return std::make_shared<const SmdpModel>(
        SmdpModel::build(space, ModelContext::make(p, stats, p_reject_mr)));
}

SolveOutcome fixed_point_solve(const ModelParams& params, double rho,
                               const FixedPointOptions& opts) {
    const ModelParams p = validate(params);
    const StateSpace space = StateSpace::enumerate(p);

    LagrangeOptions lopts = opts.lagrange;
    lopts.rho = rho;

    SolveOutcome out;
    double prm = 0.0;
    std::vector<double> warm;
    out.fixed_point_converged = false;

    for (int k = 0; k < opts.max_iterations; ++k) {
        auto model = build_model(p, space, prm);
        DiscreteModel dm = DiscreteModel::uniformize(model, choose_eta(*model));
        LagrangeOutcome lag = lagrangian_solve(dm, lopts, warm);
        warm = lag.rvi.values;
        if (lag.beta > 0.0) lopts.beta_initial = lag.beta;

        out.model = model;
        out.policy = lag.rvi.policy;
        out.theta = lag.rvi.gain;
        out.values = lag.rvi.values;
        out.beta = lag.beta;
        out.rejection = lag.rejection;
        out.p_reject_mr_model = prm;
        out.stats = model->context().stats;
        out.beta_trace.insert(out.beta_trace.end(), lag.trace.begin(), lag.trace.end());
        out.fixed_point_trace.push_back(prm);
        out.termination = lag.termination;
        out.lagrange_converged = lag.converged;
        out.rvi_iterations = lag.rvi.iterations;
        out.rvi_residual = lag.rvi.residual;

        const double next = (1.0 - opts.damping) * prm + opts.damping * lag.rejection.mr;
        if (std::abs(next - prm) < opts.tol) {
            out.fixed_point_converged = true;
            break;
        }
        prm = next;
    }
    out.reward_gain = policy_gain(*out.model, out.policy, 0.0);
    return out;
}

} // namespace fmc
