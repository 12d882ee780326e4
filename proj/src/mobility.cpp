#include "fmc/mobility.hpp"

#include "fmc/error.hpp"
#include "fmc/random.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

namespace fmc {

DistanceChain::DistanceChain(int max_distance, std::vector<double> transition)
    : max_distance_(max_distance), transition_(std::move(transition)) {
    if (max_distance_ < 1) throw ValidationError("distance chain needs D >= 1");
    if (transition_.size() != static_cast<std::size_t>(size() * size()))
        throw ValidationError("distance chain matrix has wrong size");
}

std::string DistanceChain::label(int state) const {
    if (state == finished_state()) return "T";
    if (state == interrupted_state()) return "Dr";
    return std::to_string(state);
}

DistanceChain build_distance_chain(const ModelParams& p, double p_reject_mr) {
    if (!(p_reject_mr >= 0.0 && p_reject_mr <= 1.0))
        throw ValidationError("p_reject_mr must lie in [0,1]");

    const double mu = p.mu;
    const double pm = p.p_m;
    const double pr = p_reject_mr;
    const double live = 1.0 - mu;

    // Transition coefficients of the distance diagram.
    const double q1 = mu;
    const double q2 = live * (1.0 - pm * pr);
    const double q3 = live * (1.0 - pm + 2.0 * pm * pr / 6.0);
    const double q4 = live * pm * pr;
    const double q5 = live * pm * (1.0 - 5.0 * pr / 6.0);
    const double q6 = live * 3.0 * pm * pr / 6.0;
    const double q7 = live * pm * pr / 6.0;
    const double q8 = live * pm * (1.0 - pr);

    const int D = p.max_distance_D;
    const int n = D + 3;
    const int T = D + 1;
    const int Dr = D + 2;
    std::vector<double> m(static_cast<std::size_t>(n) * n, 0.0);
    auto at = [&](int i, int j) -> double& { return m[i * n + j]; };

    at(0, T) = q1;
    at(0, 0) = q2;
    at(0, 1) = q4;
    for (int d = 1; d <= D; ++d) {
        at(d, T) += q1;
        at(d, d) += q3;
        at(d, d == D ? Dr : d + 1) += q6;
        if (d == 1) {
            at(d, 0) += q5;
        } else {
            at(d, d - 1) += q7;
            at(d, 0) += q8;
        }
    }
    at(T, T) = 1.0;
    at(Dr, Dr) = 1.0;
    return DistanceChain(D, std::move(m));
}

DistanceStats distance_statistics(const DistanceChain& chain) {
    const int D = chain.max_distance();
    const int nt = D + 1;  // transient states 0..D

    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(nt, nt);
    for (int i = 0; i < nt; ++i)
        for (int j = 0; j < nt; ++j) a(j, i) -= chain.at(i, j);  // (I - Q)^T

    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible())
        throw SolverError("distance chain fundamental matrix is singular (no absorption)");
    Eigen::VectorXd e0 = Eigen::VectorXd::Zero(nt);
    e0(0) = 1.0;
    const Eigen::VectorXd visits = lu.solve(e0);  // row 0 of (I - Q)^{-1}

    DistanceStats s;
    const double total = visits.sum();
    s.by_distance.resize(nt);
    for (int d = 0; d < nt; ++d) {
        s.by_distance[d] = std::max(0.0, visits(d) / total);
        s.mean_distance += d * s.by_distance[d];
    }
    for (int d = 0; d < nt; ++d)
        s.p_interrupt += visits(d) * chain.at(d, chain.interrupted_state());
    s.p_interrupt = std::clamp(s.p_interrupt, 0.0, 1.0);
    return s;
}

WalkEstimate simulate_walk(const DistanceChain& chain, std::uint64_t seed,
                           std::uint64_t n_services) {
    if (n_services == 0) throw ValidationError("simulate_walk needs n_services >= 1");

    const int D = chain.max_distance();
    const int n = chain.size();
    const int nt = D + 1;

    std::vector<double> cumulative(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) cumulative[i * n + j] = acc += chain.at(i, j);
    }

    Rng rng(seed);
    std::vector<std::uint64_t> visits(nt);
    // Sums over lifetimes of visit counts and their cross moments with the
    // lifetime length, for the ratio-estimator variance.
    std::vector<double> sum_n(nt), sum_n2(nt), sum_nl(nt);
    double sum_l = 0, sum_l2 = 0, sum_m = 0, sum_m2 = 0, sum_ml = 0;
    std::uint64_t interrupted = 0;

    for (std::uint64_t k = 0; k < n_services; ++k) {
        std::fill(visits.begin(), visits.end(), 0);
        int state = 0;
        while (state < nt) {
            ++visits[state];
            const double u = rng.uniform();
            const double* row = &cumulative[state * n];
            int next = 0;
            while (next < n - 1 && u >= row[next]) ++next;
            state = next;
        }
        if (state == chain.interrupted_state()) ++interrupted;

        double life = 0, moment = 0;
        for (int d = 0; d < nt; ++d) {
            life += visits[d];
            moment += d * static_cast<double>(visits[d]);
        }
        for (int d = 0; d < nt; ++d) {
            const double v = static_cast<double>(visits[d]);
            sum_n[d] += v;
            sum_n2[d] += v * v;
            sum_nl[d] += v * life;
        }
        sum_l += life;
        sum_l2 += life * life;
        sum_m += moment;
        sum_m2 += moment * moment;
        sum_ml += moment * life;
    }

    const double N = static_cast<double>(n_services);
    const double mean_l = sum_l / N;
    auto ratio_se = [&](double sx, double sx2, double sxl) {
        const double r = sx / sum_l;
        const double var = (sx2 - 2.0 * r * sxl + r * r * sum_l2) / N;
        return std::sqrt(std::max(0.0, var) / N) / mean_l;
    };

    WalkEstimate est;
    est.n_services = n_services;
    est.stats.by_distance.resize(nt);
    est.by_distance_se.resize(nt);
    for (int d = 0; d < nt; ++d) {
        est.stats.by_distance[d] = sum_n[d] / sum_l;
        est.by_distance_se[d] = ratio_se(sum_n[d], sum_n2[d], sum_nl[d]);
    }
    est.stats.mean_distance = sum_m / sum_l;
    est.mean_distance_se = ratio_se(sum_m, sum_m2, sum_ml);
    est.stats.p_interrupt = static_cast<double>(interrupted) / N;
    est.p_interrupt_se =
        std::sqrt(est.stats.p_interrupt * (1.0 - est.stats.p_interrupt) / N);
    return est;
}

std::string mobility_csv(const DistanceChain& chain, const DistanceStats& stats) {
    std::ostringstream out;
    out.precision(17);
    out << "from";
    for (int j = 0; j < chain.size(); ++j) out << ',' << chain.label(j);
    out << '\n';
    for (int i = 0; i < chain.size(); ++i) {
        out << chain.label(i);
        for (int j = 0; j < chain.size(); ++j) out << ',' << chain.at(i, j);
        out << '\n';
    }
    out << "P_d";
    for (int j = 0; j < chain.size(); ++j)
        out << ',' << (j <= stats.max_distance() ? stats.at(j) : 0.0);
    out << '\n';
    return out.str();
}

} // namespace fmc
