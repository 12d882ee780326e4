#include "fmc/compare.hpp"

#include "fmc/error.hpp"

#include <cmath>
#include <cstdio>
#include <memory>

namespace fmc {

namespace {

template <class... Args>
std::string fmt(const char* f, Args... args) {
    char buf[200];
    std::snprintf(buf, sizeof buf, f, static_cast<double>(args)...);
    return buf;
}

template <class M>
Check row_sums(const std::string& name, const M& m, int rows, double tol) {
    double worst = 0.0, most_negative = 0.0;
    int worst_row = -1;
    for (int k = 0; k < rows; ++k) {
        double sum = 0.0;
        for (double v : m.probabilities(k)) {
            sum += v;
            most_negative = std::min(most_negative, v);
        }
        if (std::abs(sum - 1.0) > worst) {
            worst = std::abs(sum - 1.0);
            worst_row = k;
        }
    }
    Check c{name, worst <= tol && most_negative >= 0.0, {}};
    c.detail = fmt("max |row sum - 1| = %.3g (row %.0f), min entry %.3g", worst, worst_row,
                   most_negative);
    return c;
}

// A rejection probability check; sigma is the replication standard error.
Check reject_check(const std::string& name, double simulated, double hw, double analytic,
                   double sigmas) {
    const double sigma = hw / 1.96;
    const double diff = std::abs(simulated - analytic);
    Check c{name, diff <= sigmas * sigma + 1e-9, {}};
    c.detail = fmt("simulated %.5f, analytic %.5f, sigma %.3g", simulated, analytic, sigma);
    return c;
}

} // namespace

std::vector<Check> simulation_checks(const ModelParams& p, const PreparedPolicy& prepared,
                                     const SimConfig& cfg_in, double reward_rel_tol,
                                     double reject_sigmas) {
    SimConfig cfg = cfg_in;
    cfg.mode = SimMode::Analytic;
    const SimResult res = run_simulation(p, decision_rule(prepared), cfg,
                                         prepared.model->context().stats, prepared.p_reject_mr);
    const SimMetrics& s = res.aggregate;
    const double g = policy_gain(*prepared.model, *prepared.policy, 0.0);
    const RejectionStats r = rejection_probabilities(
        steady_state(*prepared.model, *prepared.policy), *prepared.policy, *prepared.model);

    std::vector<Check> out;
    const double rel = std::abs(s.avg_reward_per_time - g) / std::max(std::abs(g), 1e-12);
    out.push_back({"sim_reward", rel <= reward_rel_tol,
                   fmt("simulated %.5f +- %.5f, analytic %.5f, relative error %.3g",
                       s.avg_reward_per_time, s.avg_reward_per_time_hw, g, rel)});
    out.push_back(reject_check("sim_reject_nr", s.p_reject_nr, s.p_reject_nr_hw, r.nr,
                               reject_sigmas));
    if (s.mr_arrivals > 0)
        out.push_back(reject_check("sim_reject_mr", s.p_reject_mr, s.p_reject_mr_hw, r.mr,
                                   reject_sigmas));
    return out;
}

std::vector<Check> consistency_checks(const ModelParams& p_in, const CompareOptions& opts) {
    const ModelParams p = validate(p_in);
    check_spec(opts.policy, p);
    const double rho = opts.rho >= 0.0 ? opts.rho : rejection_threshold(p);
    PreparedPolicy prepared = prepare_policy(opts.policy, p, rho, opts.solve);

    if (opts.inject_fault) {
        auto broken = std::make_shared<SmdpModel>(*prepared.model);
        broken->corrupt_kernel_entry(0, 1.5);
        prepared.model = std::move(broken);
    }
    const SmdpModel& m = *prepared.model;
    const Policy& pol = *prepared.policy;

    std::vector<Check> out;
    out.push_back(row_sums("kernel_row_sums", m, m.num_choices(), 1e-10));

    DiscreteModel dm = DiscreteModel::uniformize(prepared.model, choose_eta(m), 0.0);
    out.push_back(row_sums("uniformized_row_sums", dm, m.num_choices(), 1e-10));

    const double g_smdp = policy_gain(m, pol, 0.0);
    const double g_unif = uniformized_gain(dm, pol);
    out.push_back({"gain_identity",
                   std::abs(g_smdp - g_unif) <= 1e-8 * std::max(1.0, std::abs(g_smdp)),
                   fmt("semi-Markov %.12g, uniformized %.12g", g_smdp, g_unif)});

    if (std::holds_alternative<SmdpSpec>(opts.policy)) {
        dm.set_beta(prepared.beta);
        const RviResult rvi = relative_value_iteration(dm, opts.solve.lagrange.rvi);
        out.push_back({"bellman_residual", rvi.residual < 1e-6,
                       fmt("residual %.3g after %.0f sweeps", rvi.residual, rvi.iterations)});

        int decision_states = 0;
        for (int s = 0; s < m.num_states(); ++s)
            if (m.choice_end(s) - m.choice_begin(s) > 1) ++decision_states;
        if (decision_states <= opts.brute_force_limit) {
            const BruteForceResult bf = brute_force_optimal(m, prepared.beta, opts.brute_force_limit);
            const double g_rvi = policy_gain(m, rvi.policy, prepared.beta);
            out.push_back({"brute_force_optimum", std::abs(bf.gain - g_rvi) <= 1e-8,
                           fmt("enumerated %.12g, value iteration %.12g", bf.gain, g_rvi)});
        }
    }

    for (auto& c : simulation_checks(p, prepared, opts.sim, opts.reward_rel_tol,
                                     opts.reject_sigmas))
        out.push_back(std::move(c));
    return out;
}

} // namespace fmc
