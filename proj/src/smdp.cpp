#include "fmc/smdp.hpp"

#include "fmc/error.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

namespace fmc {

std::string Event::label() const {
    switch (kind) {
    case EventKind::ArrivalNR: return "An";
    case EventKind::ArrivalMR: return "Am";
    case EventKind::FinishLocal: return "TL" + std::to_string(units);
    case EventKind::FinishRemote: return "TR" + std::to_string(units);
    case EventKind::MoveLocal: return "ML" + std::to_string(units);
    case EventKind::MoveRemote: return "MR" + std::to_string(units);
    }
    return "?";
}

std::string Action::label() const {
    if (is_observe()) return "observe";
    if (is_reject()) return "reject";
    return "accept" + std::to_string(code_);
}

std::string SystemState::label() const {
    std::string out = "L(";
    for (std::size_t i = 0; i < local.size(); ++i)
        out += (i ? " " : "") + std::to_string(local[i]);
    out += ") R(";
    for (std::size_t i = 0; i < remote.size(); ++i)
        out += (i ? " " : "") + std::to_string(remote[i]);
    out += ") ";
    out += event.label();
    return out;
}

ModelContext ModelContext::make(const ModelParams& p, const DistanceStats& stats,
                                double p_reject_mr) {
    if (stats.max_distance() != p.max_distance_D)
        throw ValidationError("distance statistics do not match max_distance_D");
    return {p, stats, p_reject_mr, mr_arrival_rate(p)};
}

int occupied(const std::vector<int>& local, const std::vector<int>& remote) {
    int units = 0;
    for (std::size_t i = 0; i < local.size(); ++i)
        units += static_cast<int>(i + 1) * (local[i] + remote[i]);
    return units;
}

int occupied(const SystemState& s) { return occupied(s.local, s.remote); }

std::vector<Action> feasible_actions(const SystemState& s, const ModelParams& p) {
    if (!s.event.is_arrival()) return {Action::observe()};
    std::vector<Action> out{Action::reject()};
    const int free_units = p.capacity_B - occupied(s);
    for (int c = 1; c <= std::min(p.max_alloc_C, free_units); ++c)
        out.push_back(Action::accept(c));
    return out;
}

bool is_feasible(const SystemState& s, Action a, const ModelParams& p) {
    if (!s.event.is_arrival()) return a.is_observe();
    if (a.is_observe()) return false;
    return a.is_reject() ||
           (a.units() <= p.max_alloc_C && occupied(s) + a.units() <= p.capacity_B);
}

std::vector<Event> consistent_events(const std::vector<int>& local,
                                     const std::vector<int>& remote) {
    std::vector<Event> out{Event::arrival_nr(), Event::arrival_mr()};
    const int C = static_cast<int>(local.size());
    for (int c = 1; c <= C; ++c)
        if (local[c - 1] > 0) out.push_back(Event::finish_local(c));
    for (int c = 1; c <= C; ++c)
        if (remote[c - 1] > 0) out.push_back(Event::finish_remote(c));
    for (int c = 1; c <= C; ++c)
        if (local[c - 1] > 0) out.push_back(Event::move_local(c));
    for (int c = 1; c <= C; ++c)
        if (remote[c - 1] > 0) out.push_back(Event::move_remote(c));
    return out;
}

double total_rate(const std::vector<int>& local, const std::vector<int>& remote,
                  const ModelParams& p, double lambda_m) {
    int services = 0;
    for (std::size_t i = 0; i < local.size(); ++i) services += local[i] + remote[i];
    return p.lambda_n + lambda_m + (p.mu + p.p_m) * services;
}

double event_rate_of(const Event& e, const std::vector<int>& local,
                     const std::vector<int>& remote, const ModelParams& p, double lambda_m) {
    switch (e.kind) {
    case EventKind::ArrivalNR: return p.lambda_n;
    case EventKind::ArrivalMR: return lambda_m;
    case EventKind::FinishLocal: return local[e.units - 1] * p.mu;
    case EventKind::FinishRemote: return remote[e.units - 1] * p.mu;
    case EventKind::MoveLocal: return local[e.units - 1] * p.p_m;
    case EventKind::MoveRemote: return remote[e.units - 1] * p.p_m;
    }
    return 0.0;
}

std::vector<CountOutcome> post_action_counts(const SystemState& s, Action a, double p_reject_mr) {
    CountOutcome base{s.local, s.remote, 1.0};
    const int i = s.event.units - 1;
    switch (s.event.kind) {
    case EventKind::ArrivalNR:
    case EventKind::ArrivalMR:
        if (a.is_accept()) ++base.local[a.units() - 1];
        return {std::move(base)};
    case EventKind::FinishLocal:
        --base.local[i];
        return {std::move(base)};
    case EventKind::FinishRemote:
        --base.remote[i];
        return {std::move(base)};
    case EventKind::MoveLocal: {
        // Migration accepted elsewhere: the VM leaves. Rejected: the service
        // stays here and is now remote.
        --base.local[i];
        CountOutcome stays = base;
        ++stays.remote[i];
        base.prob = 1.0 - p_reject_mr;
        stays.prob = p_reject_mr;
        std::vector<CountOutcome> out;
        if (base.prob > 0.0) out.push_back(std::move(base));
        if (stays.prob > 0.0) out.push_back(std::move(stays));
        return out;
    }
    case EventKind::MoveRemote: {
        CountOutcome leaves = base;
        --leaves.remote[i];
        leaves.prob = 1.0 - p_reject_mr;
        base.prob = p_reject_mr;
        std::vector<CountOutcome> out;
        if (leaves.prob > 0.0) out.push_back(std::move(leaves));
        if (base.prob > 0.0) out.push_back(std::move(base));
        return out;
    }
    }
    return {std::move(base)};
}

double sojourn(const SystemState& s, Action a, const ModelContext& ctx) {
    double y = 0.0;
    for (const auto& o : post_action_counts(s, a, ctx.p_reject_mr))
        y += o.prob / total_rate(o.local, o.remote, ctx.params, ctx.lambda_m);
    return y;
}

double event_rate(const SystemState& s, Action a, const ModelContext& ctx) {
    return 1.0 / sojourn(s, a, ctx);
}

double lump_income(const SystemState& s, Action a, const ModelContext& ctx) {
    const auto& p = ctx.params;
    switch (s.event.kind) {
    case EventKind::FinishLocal:
    case EventKind::FinishRemote: return p.income_finish;
    case EventKind::MoveLocal:
    case EventKind::MoveRemote: return p.income_migrate * (1.0 - ctx.p_reject_mr);
    case EventKind::ArrivalNR: return a.is_reject() ? -p.loss_reject_nr : 0.0;
    case EventKind::ArrivalMR:
        return a.is_reject() ? -(p.loss_interrupt / 2.0) * ctx.stats.boundary()
                             : -p.cost_migrate;
    }
    return 0.0;
}

double cost_rate(const std::vector<int>& local, const std::vector<int>& remote,
                 const ModelParams& p, double mean_distance) {
    double d = 0.0;
    for (std::size_t i = 0; i < local.size(); ++i) {
        const double c = static_cast<double>(i + 1);
        d += p.weight_delay * remote[i] * mean_distance +
             p.weight_occupancy * p.price_resource * c * (local[i] + remote[i]);
    }
    return d;
}

namespace {

// E[d / gamma] over the post-action outcomes: the expected cost accrued
// before the next epoch.
double expected_cost(const SystemState& s, Action a, const ModelContext& ctx) {
    double total = 0.0;
    for (const auto& o : post_action_counts(s, a, ctx.p_reject_mr))
        total += o.prob * cost_rate(o.local, o.remote, ctx.params, ctx.stats.mean_distance) /
                 total_rate(o.local, o.remote, ctx.params, ctx.lambda_m);
    return total;
}

} // namespace

double cost_rate(const SystemState& s, Action a, const ModelContext& ctx) {
    return expected_cost(s, a, ctx) / sojourn(s, a, ctx);
}

double reward(const SystemState& s, Action a, const ModelContext& ctx) {
    return lump_income(s, a, ctx) - expected_cost(s, a, ctx);
}

double constraint_value(const SystemState& s, Action a, const ModelParams& p) {
    if (!a.is_reject()) return 0.0;
    if (s.event.kind == EventKind::ArrivalNR) return p.weight_nr;
    if (s.event.kind == EventKind::ArrivalMR) return p.weight_mr;
    return 0.0;
}

double lagrange_reward(const SystemState& s, Action a, double beta, const ModelContext& ctx) {
    return reward(s, a, ctx) - beta * constraint_value(s, a, ctx.params);
}

std::vector<std::pair<SystemState, double>> transitions(const SystemState& s, Action a,
                                                        const ModelContext& ctx) {
    if (!is_feasible(s, a, ctx.params))
        throw ValidationError("infeasible action " + a.label() + " in state " + s.label());
    std::vector<std::pair<SystemState, double>> out;
    for (auto& o : post_action_counts(s, a, ctx.p_reject_mr)) {
        const double gamma = total_rate(o.local, o.remote, ctx.params, ctx.lambda_m);
        for (const auto& e : consistent_events(o.local, o.remote)) {
            const double q = o.prob * event_rate_of(e, o.local, o.remote, ctx.params,
                                                    ctx.lambda_m) / gamma;
            if (q > 0.0) out.push_back({SystemState{o.local, o.remote, e}, q});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// StateSpace

std::size_t StateSpace::VecHash::operator()(const std::vector<int>& v) const noexcept {
    std::size_t h = 1469598103934665603ull;
    for (int x : v) {
        h ^= static_cast<std::size_t>(x) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return h;
}

namespace {

std::vector<int> concat(const std::vector<int>& local, const std::vector<int>& remote) {
    std::vector<int> key(local);
    key.insert(key.end(), remote.begin(), remote.end());
    return key;
}

} // namespace

StateSpace StateSpace::enumerate(const ModelParams& p, std::size_t max_states) {
    if (p.max_alloc_C < 1) throw ValidationError("max_alloc_C must be >= 1");
    if (p.capacity_B < 0) throw ValidationError("capacity_B must be >= 0");

    StateSpace space;
    space.max_alloc_ = p.max_alloc_C;
    space.capacity_ = p.capacity_B;
    const int C = p.max_alloc_C;
    const int slots = 2 * C;

    // Depth-first over (local_1..local_C, remote_1..remote_C) in increasing
    // value order yields count vectors in lexicographic order.
    std::vector<int> counts(slots, 0);
    auto unit_size = [C](int slot) { return slot % C + 1; };

    auto emit = [&] {
        std::vector<int> local(counts.begin(), counts.begin() + C);
        std::vector<int> remote(counts.begin() + C, counts.end());
        space.first_of_counts_.emplace(counts, space.size());
        for (const auto& e : consistent_events(local, remote)) {
            if (space.states_.size() >= max_states)
                throw ValidationError("state space exceeds the cap of " +
                                      std::to_string(max_states) + " states");
            space.states_.push_back({local, remote, e});
        }
    };

    auto recurse = [&](auto&& self, int slot, int used) -> void {
        if (slot == slots) {
            emit();
            return;
        }
        const int size = unit_size(slot);
        for (int n = 0; used + n * size <= p.capacity_B; ++n) {
            counts[slot] = n;
            self(self, slot + 1, used + n * size);
        }
        counts[slot] = 0;
    };
    recurse(recurse, 0, 0);
    return space;
}

int StateSpace::first_index(const std::vector<int>& local, const std::vector<int>& remote) const {
    const auto it = first_of_counts_.find(concat(local, remote));
    return it == first_of_counts_.end() ? -1 : it->second;
}

int StateSpace::index_of(const std::vector<int>& local, const std::vector<int>& remote,
                         const Event& e) const {
    const int first = first_index(local, remote);
    if (first < 0) return -1;
    for (int i = first; i < size() && states_[i].local == local && states_[i].remote == remote;
         ++i)
        if (states_[i].event == e) return i;
    return -1;
}

int StateSpace::index_of(const SystemState& s) const {
    return index_of(s.local, s.remote, s.event);
}

// ---------------------------------------------------------------------------
// SmdpModel

namespace {

struct StateRows {
    std::vector<Choice> choices;
    std::vector<int> row_len;
    std::vector<int> col;
    std::vector<double> prob;
};

StateRows build_rows(const StateSpace& space, int s, const ModelContext& ctx) {
    StateRows rows;
    const auto& state = space[s];
    for (const Action a : feasible_actions(state, ctx.params)) {
        Choice ch;
        ch.action = a;
        ch.income = lump_income(state, a, ctx);
        ch.sojourn = sojourn(state, a, ctx);
        const double cost = expected_cost(state, a, ctx);
        ch.cost_rate = cost / ch.sojourn;
        ch.constraint = constraint_value(state, a, ctx.params);
        ch.reward = ch.income - cost;
        rows.choices.push_back(ch);

        int len = 0;
        for (const auto& o : post_action_counts(state, a, ctx.p_reject_mr)) {
            const double gamma = total_rate(o.local, o.remote, ctx.params, ctx.lambda_m);
            const int first = space.first_index(o.local, o.remote);
            if (first < 0)
                throw ValidationError("successor counts outside the state space from " +
                                      state.label());
            int idx = first;
            for (const auto& e : consistent_events(o.local, o.remote)) {
                const double q =
                    o.prob * event_rate_of(e, o.local, o.remote, ctx.params, ctx.lambda_m) /
                    gamma;
                if (q > 0.0) {
                    rows.col.push_back(idx);
                    rows.prob.push_back(q);
                    ++len;
                }
                ++idx;
            }
        }
        rows.row_len.push_back(len);
    }
    return rows;
}

} // namespace

SmdpModel SmdpModel::build(StateSpace space, const ModelContext& ctx) {
    if (space.max_alloc() != ctx.params.max_alloc_C || space.capacity() != ctx.params.capacity_B)
        throw ValidationError("state space was enumerated for different parameters");

    const int M = space.size();
    std::vector<StateRows> per_state(M);

    // Rows depend only on their own (s, a): build in parallel, concatenate in order.
#pragma omp parallel for schedule(dynamic, 64)
    for (int s = 0; s < M; ++s) per_state[s] = build_rows(space, s, ctx);

    SmdpModel m;
    m.ctx_ = ctx;
    m.choice_offset_.reserve(M + 1);
    m.choice_offset_.push_back(0);
    m.row_offset_.push_back(0);
    for (int s = 0; s < M; ++s) {
        auto& rows = per_state[s];
        std::size_t pos = 0;
        for (std::size_t j = 0; j < rows.choices.size(); ++j) {
            m.choices_.push_back(rows.choices[j]);
            m.choice_state_.push_back(s);
            const int len = rows.row_len[j];
            m.col_.insert(m.col_.end(), rows.col.begin() + pos, rows.col.begin() + pos + len);
            m.prob_.insert(m.prob_.end(), rows.prob.begin() + pos, rows.prob.begin() + pos + len);
            pos += len;
            m.row_offset_.push_back(static_cast<int>(m.col_.size()));
        }
        m.choice_offset_.push_back(static_cast<int>(m.choices_.size()));
        rows = {};
    }
    m.space_ = std::move(space);
    return m;
}

int SmdpModel::find_choice(int s, Action a) const {
    for (int k = choice_begin(s); k < choice_end(s); ++k)
        if (choices_[k].action == a) return k;
    return -1;
}

double SmdpModel::min_sojourn() const {
    double y = std::numeric_limits<double>::infinity();
    for (const auto& c : choices_) y = std::min(y, c.sojourn);
    return y;
}

void SmdpModel::corrupt_kernel_entry(int k, double factor) {
    prob_.at(row_offset_.at(k)) *= factor;
}

// ---------------------------------------------------------------------------
// DiscreteModel

double choose_eta(const SmdpModel& m) { return 0.999 * m.min_sojourn(); }

DiscreteModel DiscreteModel::uniformize(std::shared_ptr<const SmdpModel> base, double eta,
                                        double beta) {
    const double ymin = base->min_sojourn();
    if (!(eta > 0.0) || eta > ymin * (1.0 + 1e-12))
        throw ValidationError("uniformization constant eta must lie in (0, min y]");

    DiscreteModel d;
    d.base_ = std::move(base);
    d.eta_ = eta;
    const SmdpModel& m = *d.base_;
    const int K = m.num_choices();

    d.row_offset_.reserve(K + 1);
    d.row_offset_.push_back(0);
    for (int k = 0; k < K; ++k) {
        const int s = m.choice_state(k);
        const double scale = eta / m.choice(k).sojourn;
        const auto succ = m.successors(k);
        const auto prob = m.probabilities(k);
        double self = 0.0;
        for (std::size_t j = 0; j < succ.size(); ++j) {
            if (succ[j] == s) {
                self = prob[j];
                continue;
            }
            d.col_.push_back(succ[j]);
            d.prob_.push_back(scale * prob[j]);
        }
        // The diagonal is always stored, last in the row.
        d.col_.push_back(s);
        d.prob_.push_back(1.0 + scale * (self - 1.0));
        d.row_offset_.push_back(static_cast<int>(d.col_.size()));
    }
    d.set_beta(beta);
    return d;
}

void DiscreteModel::set_beta(double beta) {
    beta_ = beta;
    const SmdpModel& m = *base_;
    reward_.resize(m.num_choices());
    for (int k = 0; k < m.num_choices(); ++k) {
        const auto& c = m.choice(k);
        reward_[k] = (c.reward - beta * c.constraint) / c.sojourn;
    }
}

// ---------------------------------------------------------------------------

std::vector<std::filesystem::path> write_model_csv(const SmdpModel& m,
                                                   const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto& space = m.space();
    const int C = space.max_alloc();
    std::vector<std::filesystem::path> paths{dir / "states.csv", dir / "kernel.csv",
                                             dir / "rewards.csv"};

    std::ofstream states(paths[0]);
    states << "index";
    for (int c = 1; c <= C; ++c) states << ",local_" << c;
    for (int c = 1; c <= C; ++c) states << ",remote_" << c;
    states << ",event\n";
    for (int s = 0; s < space.size(); ++s) {
        states << s;
        for (int v : space[s].local) states << ',' << v;
        for (int v : space[s].remote) states << ',' << v;
        states << ',' << space[s].event.label() << '\n';
    }

    std::ofstream kernel(paths[1]);
    std::ofstream rewards(paths[2]);
    kernel.precision(17);
    rewards.precision(17);
    kernel << "s,a,s_next,prob\n";
    rewards << "s,a,g,d,y,f\n";
    for (int s = 0; s < space.size(); ++s) {
        for (int k = m.choice_begin(s); k < m.choice_end(s); ++k) {
            const auto& ch = m.choice(k);
            const int a = ch.action.code();
            const auto succ = m.successors(k);
            const auto prob = m.probabilities(k);
            for (std::size_t j = 0; j < succ.size(); ++j)
                kernel << s << ',' << a << ',' << succ[j] << ',' << prob[j] << '\n';
            rewards << s << ',' << a << ',' << ch.income << ',' << ch.cost_rate << ','
                    << ch.sojourn << ',' << ch.constraint << '\n';
        }
    }
    for (const auto& p : paths)
        if (!std::filesystem::exists(p))
            throw ValidationError("failed to write " + p.string());
    return paths;
}

} // namespace fmc
