#pragma once

#include "fmc/config.hpp"
#include "fmc/mobility.hpp"

#include <compare>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace fmc {

enum class EventKind : std::uint8_t {
    ArrivalNR,
    ArrivalMR,
    FinishLocal,
    FinishRemote,
    MoveLocal,
    MoveRemote,
};

struct Event {
    EventKind kind = EventKind::ArrivalNR;
    int units = 0;  ///< allocation class c of the affected service; 0 for arrivals

    static Event arrival_nr() { return {EventKind::ArrivalNR, 0}; }
    static Event arrival_mr() { return {EventKind::ArrivalMR, 0}; }
    static Event finish_local(int c) { return {EventKind::FinishLocal, c}; }
    static Event finish_remote(int c) { return {EventKind::FinishRemote, c}; }
    static Event move_local(int c) { return {EventKind::MoveLocal, c}; }
    static Event move_remote(int c) { return {EventKind::MoveRemote, c}; }

    bool is_arrival() const {
        return kind == EventKind::ArrivalNR || kind == EventKind::ArrivalMR;
    }
    bool is_finish() const {
        return kind == EventKind::FinishLocal || kind == EventKind::FinishRemote;
    }
    bool is_move() const {
        return kind == EventKind::MoveLocal || kind == EventKind::MoveRemote;
    }

    /// "An", "Am", "TL2", "TR1", "ML3", "MR1"
    std::string label() const;

    auto operator<=>(const Event&) const = default;
};

/// Number of distinct event kinds for a given C: 2 + 4C.
constexpr int event_kind_count(int max_alloc) { return 2 + 4 * max_alloc; }

/// Reject (code 0), Accept(c) (code c >= 1) or Observe (code -1). Ordering by
/// code is the Bellman tie-break order: Reject < Accept(1) < ... < Accept(C).
class Action {
public:
    constexpr Action() = default;

    static constexpr Action reject() { return Action(0); }
    static constexpr Action accept(int units) { return Action(units); }
    static constexpr Action observe() { return Action(-1); }

    constexpr int code() const { return code_; }
    constexpr bool is_reject() const { return code_ == 0; }
    constexpr bool is_accept() const { return code_ > 0; }
    constexpr bool is_observe() const { return code_ < 0; }
    constexpr int units() const { return code_ > 0 ? code_ : 0; }

    std::string label() const;

    constexpr auto operator<=>(const Action&) const = default;

private:
    constexpr explicit Action(int code) : code_(code) {}
    int code_ = -1;
};

/// Per-class service counts (index c-1) plus the event that triggered the epoch.
struct SystemState {
    std::vector<int> local;
    std::vector<int> remote;
    Event event;

    int max_alloc() const { return static_cast<int>(local.size()); }
    std::string label() const;

    bool operator==(const SystemState&) const = default;
};

/// Everything besides the state that the reward and kernel functions need.
struct ModelContext {
    ModelParams params;
    DistanceStats stats;
    double p_reject_mr = 0.0;  ///< exogenous MR rejection probability of neighbouring DCs
    double lambda_m = 0.0;

    static ModelContext make(const ModelParams& p, const DistanceStats& stats,
                             double p_reject_mr);
};

int occupied(const std::vector<int>& local, const std::vector<int>& remote);
int occupied(const SystemState& s);

std::vector<Action> feasible_actions(const SystemState& s, const ModelParams& p);
bool is_feasible(const SystemState& s, Action a, const ModelParams& p);

/// Events that can fire from a count vector, in (kind, c) order.
std::vector<Event> consistent_events(const std::vector<int>& local,
                                     const std::vector<int>& remote);

/// Total event rate of a count vector.
double total_rate(const std::vector<int>& local, const std::vector<int>& remote,
                  const ModelParams& p, double lambda_m);

/// Rate of one event given the counts it fires from.
double event_rate_of(const Event& e, const std::vector<int>& local,
                     const std::vector<int>& remote, const ModelParams& p, double lambda_m);

/// A post-action count vector and its probability. Move events split on
/// whether the neighbouring DC accepts the migration.
struct CountOutcome {
    std::vector<int> local;
    std::vector<int> remote;
    double prob = 1.0;
};

std::vector<CountOutcome> post_action_counts(const SystemState& s, Action a, double p_reject_mr);

/// gamma(s,a) = 1 / y(s,a), evaluated on post-action counts.
double event_rate(const SystemState& s, Action a, const ModelContext& ctx);
/// y(s,a): expected time to the next epoch.
double sojourn(const SystemState& s, Action a, const ModelContext& ctx);

/// g(s,a)
double lump_income(const SystemState& s, Action a, const ModelContext& ctx);

/// d(counts): delay plus occupancy cost rate of a count vector.
double cost_rate(const std::vector<int>& local, const std::vector<int>& remote,
                 const ModelParams& p, double mean_distance);
/// d(s,a): cost rate over the sojourn after `a` (outcome-averaged for moves).
double cost_rate(const SystemState& s, Action a, const ModelContext& ctx);

/// r(s,a) = g(s,a) - d(s,a) y(s,a)
double reward(const SystemState& s, Action a, const ModelContext& ctx);

/// f(s,a): weighted rejection indicator.
double constraint_value(const SystemState& s, Action a, const ModelParams& p);

/// r_beta(s,a) = r(s,a) - beta f(s,a)
double lagrange_reward(const SystemState& s, Action a, double beta, const ModelContext& ctx);

/// Successor states with their embedded-chain probabilities.
std::vector<std::pair<SystemState, double>> transitions(const SystemState& s, Action a,
                                                        const ModelContext& ctx);

/// Dense, lexicographically ordered enumeration of feasible states.
class StateSpace {
public:
    static constexpr std::size_t kDefaultMaxStates = 2'000'000;

    static StateSpace enumerate(const ModelParams& p,
                                std::size_t max_states = kDefaultMaxStates);

    int size() const { return static_cast<int>(states_.size()); }
    int max_alloc() const { return max_alloc_; }
    int capacity() const { return capacity_; }
    const SystemState& operator[](int i) const { return states_[i]; }
    const std::vector<SystemState>& states() const { return states_; }

    /// -1 if not present.
    int index_of(const SystemState& s) const;
    int index_of(const std::vector<int>& local, const std::vector<int>& remote,
                 const Event& e) const;

    /// Index of the first state with the given counts (its An state), or -1.
    int first_index(const std::vector<int>& local, const std::vector<int>& remote) const;

private:
    struct VecHash {
        std::size_t operator()(const std::vector<int>& v) const noexcept;
    };

    int max_alloc_ = 0;
    int capacity_ = 0;
    std::vector<SystemState> states_;
    std::unordered_map<std::vector<int>, int, VecHash> first_of_counts_;
};

/// One feasible (state, action) pair of the untransformed model.
struct Choice {
    Action action;
    double income = 0.0;     ///< g
    double cost_rate = 0.0;  ///< d
    double sojourn = 0.0;    ///< y
    double constraint = 0.0; ///< f
    double reward = 0.0;     ///< r = g - d y
};

/// The semi-Markov model with every feasible (s,a) and its embedded kernel in CSR form.
class SmdpModel {
public:
    static SmdpModel build(StateSpace space, const ModelContext& ctx);

    const StateSpace& space() const { return space_; }
    const ModelContext& context() const { return ctx_; }
    int num_states() const { return space_.size(); }
    int num_choices() const { return static_cast<int>(choices_.size()); }

    int choice_begin(int s) const { return choice_offset_[s]; }
    int choice_end(int s) const { return choice_offset_[s + 1]; }
    const Choice& choice(int k) const { return choices_[k]; }
    int choice_state(int k) const { return choice_state_[k]; }
    /// -1 if `a` is not feasible in state s.
    int find_choice(int s, Action a) const;

    std::span<const int> successors(int k) const {
        return {col_.data() + row_offset_[k], col_.data() + row_offset_[k + 1]};
    }
    std::span<const double> probabilities(int k) const {
        return {prob_.data() + row_offset_[k], prob_.data() + row_offset_[k + 1]};
    }

    double min_sojourn() const;

    // Raw CSR access for kernels.
    const std::vector<int>& row_offsets() const { return row_offset_; }
    const std::vector<int>& columns() const { return col_; }
    const std::vector<double>& values() const { return prob_; }

    /// Test hook: scales one kernel entry to emulate a corrupted model.
    void corrupt_kernel_entry(int k, double factor);

private:
    StateSpace space_;
    ModelContext ctx_;
    std::vector<int> choice_offset_;
    std::vector<int> choice_state_;
    std::vector<Choice> choices_;
    std::vector<int> row_offset_;
    std::vector<int> col_;
    std::vector<double> prob_;
};

/// Uniformized discrete-time model for a given multiplier beta.
class DiscreteModel {
public:
    static DiscreteModel uniformize(std::shared_ptr<const SmdpModel> base, double eta,
                                    double beta = 0.0);

    const SmdpModel& base() const { return *base_; }
    std::shared_ptr<const SmdpModel> base_ptr() const { return base_; }
    double eta() const { return eta_; }
    double beta() const { return beta_; }

    /// Recomputes the transformed rewards for a new multiplier; the kernel is beta-free.
    void set_beta(double beta);

    /// Overrides the transformed rewards, e.g. to minimize the rejection rate alone.
    void set_rewards(std::vector<double> rewards) { reward_ = std::move(rewards); }

    int num_states() const { return base_->num_states(); }
    double reward(int k) const { return reward_[k]; }
    const std::vector<double>& rewards() const { return reward_; }

    std::span<const int> successors(int k) const {
        return {col_.data() + row_offset_[k], col_.data() + row_offset_[k + 1]};
    }
    std::span<const double> probabilities(int k) const {
        return {prob_.data() + row_offset_[k], prob_.data() + row_offset_[k + 1]};
    }
    const std::vector<int>& row_offsets() const { return row_offset_; }
    const std::vector<int>& columns() const { return col_; }
    const std::vector<double>& values() const { return prob_; }

private:
    std::shared_ptr<const SmdpModel> base_;
    double eta_ = 0.0;
    double beta_ = 0.0;
    std::vector<double> reward_;
    std::vector<int> row_offset_;
    std::vector<int> col_;
    std::vector<double> prob_;
};

/// 0.999 * min over (s,a) of y(s,a).
double choose_eta(const SmdpModel& m);

/// Writes states.csv, kernel.csv and rewards.csv into `dir`; returns the paths.
std::vector<std::filesystem::path> write_model_csv(const SmdpModel& m,
                                                   const std::filesystem::path& dir);

} // namespace fmc
