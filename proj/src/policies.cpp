#include "fmc/policies.hpp"

#include "fmc/error.hpp"

#include <charconv>
#include <cmath>

namespace fmc {

namespace {

int parse_int(std::string_view s, const std::string& context) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ValidationError("bad policy '" + context + "'");
    return v;
}

int free_units(const SystemState& s, const ModelParams& p) { return p.capacity_B - occupied(s); }

} // namespace

int default_fixed_units(const ModelParams& p) { return std::min(2, p.max_alloc_C); }

int default_reserve(const ModelParams& p) {
    return std::min(p.capacity_B - 1, static_cast<int>(std::ceil(0.1 * p.capacity_B)));
}

PolicySpec parse_policy(const std::string& text, const ModelParams& p) {
    if (text == "smdp") return SmdpSpec{};
    if (text == "greedy") return GreedySpec{};
    if (text == "au") return AllUnitsSpec{};
    if (text == "fixed") return FixedSpec{default_fixed_units(p)};
    if (text == "rrsv") return ReserveSpec{default_reserve(p), default_fixed_units(p)};
    if (text.rfind("fixed:", 0) == 0) return FixedSpec{parse_int(std::string_view(text).substr(6), text)};
    if (text.rfind("rrsv:", 0) == 0) {
        const std::string_view args = std::string_view(text).substr(5);
        const auto comma = args.find(',');
        if (comma == std::string_view::npos) throw ValidationError("bad policy '" + text + "'");
        return ReserveSpec{parse_int(args.substr(0, comma), text),
                           parse_int(args.substr(comma + 1), text)};
    }
    throw ValidationError("unknown policy '" + text + "' (expected smdp|greedy|au|fixed:<c>|rrsv:<R>,<c>)");
}

std::string policy_name(const PolicySpec& spec) {
    struct Visitor {
        std::string operator()(SmdpSpec) const { return "smdp"; }
        std::string operator()(GreedySpec) const { return "greedy"; }
        std::string operator()(AllUnitsSpec) const { return "au"; }
        std::string operator()(FixedSpec f) const { return "fixed:" + std::to_string(f.units); }
        std::string operator()(ReserveSpec r) const {
            return "rrsv:" + std::to_string(r.reserve) + "," + std::to_string(r.units);
        }
    };
    return std::visit(Visitor{}, spec);
}

void check_spec(const PolicySpec& spec, const ModelParams& p) {
    if (const auto* f = std::get_if<FixedSpec>(&spec)) {
        if (f->units < 1 || f->units > p.max_alloc_C)
            throw ValidationError("fixed allocation must lie in [1, C]");
    } else if (const auto* r = std::get_if<ReserveSpec>(&spec)) {
        if (r->reserve < 0 || r->reserve > p.capacity_B - 1)
            throw ValidationError("reservation must lie in [0, B-1]");
        if (r->units < 1 || r->units > p.max_alloc_C)
            throw ValidationError("R-RSV allocation must lie in [1, C]");
    }
}

DecisionRule all_units_rule(const ModelParams& p) {
    return [p](const SystemState& s) {
        if (!s.event.is_arrival()) return Action::observe();
        const int free = free_units(s, p);
        return free >= 1 ? Action::accept(std::min(p.max_alloc_C, free)) : Action::reject();
    };
}

DecisionRule fixed_rule(const ModelParams& p, FixedSpec spec) {
    check_spec(spec, p);
    return [p, spec](const SystemState& s) {
        if (!s.event.is_arrival()) return Action::observe();
        return free_units(s, p) >= spec.units ? Action::accept(spec.units) : Action::reject();
    };
}

DecisionRule rrsv_rule(const ModelParams& p, ReserveSpec spec) {
    check_spec(spec, p);
    return [p, spec](const SystemState& s) {
        if (!s.event.is_arrival()) return Action::observe();
        const int free = free_units(s, p);
        const bool ok = s.event.kind == EventKind::ArrivalNR ? free - spec.units >= spec.reserve
                                                             : free >= spec.units;
        return ok ? Action::accept(spec.units) : Action::reject();
    };
}

Policy greedy_rule(const SmdpModel& m) {
    Policy pol;
    pol.actions.reserve(m.num_states());
    for (int s = 0; s < m.num_states(); ++s) {
        int best = m.choice_begin(s);
        double best_r = m.choice(best).reward / m.choice(best).sojourn;
        for (int k = best + 1; k < m.choice_end(s); ++k) {
            const double r = m.choice(k).reward / m.choice(k).sojourn;
            if (r > best_r) {
                best_r = r;
                best = k;
            }
        }
        pol.actions.push_back(m.choice(best).action);
    }
    return pol;
}

Policy greedy_rule(const DiscreteModel& m) { return greedy_rule(m.base()); }

Policy materialize(const DecisionRule& rule, const StateSpace& space) {
    Policy pol;
    pol.actions.reserve(space.size());
    for (const auto& s : space.states()) pol.actions.push_back(rule(s));
    return pol;
}

DecisionRule rule_from_policy(std::shared_ptr<const Policy> pol,
                              std::shared_ptr<const StateSpace> space) {
    return [pol = std::move(pol), space = std::move(space)](const SystemState& s) {
        const int idx = space->index_of(s);
        if (idx < 0) throw SimulationAbort("state outside the policy table: " + s.label());
        return (*pol)[idx];
    };
}

Policy baseline_policy(const PolicySpec& spec, const SmdpModel& m) {
    const auto& p = m.context().params;
    struct Visitor {
        const SmdpModel& m;
        const ModelParams& p;
        Policy operator()(SmdpSpec) const {
            throw ValidationError("the SMDP policy is produced by the solver, not a baseline");
        }
        Policy operator()(GreedySpec) const { return greedy_rule(m); }
        Policy operator()(AllUnitsSpec) const { return materialize(all_units_rule(p), m.space()); }
        Policy operator()(FixedSpec f) const { return materialize(fixed_rule(p, f), m.space()); }
        Policy operator()(ReserveSpec r) const { return materialize(rrsv_rule(p, r), m.space()); }
    };
    return std::visit(Visitor{m, p}, spec);
}

BaselineFixedPoint baseline_fixed_point(const PolicySpec& spec, const ModelParams& params,
                                        const FixedPointOptions& opts) {
    const ModelParams p = validate(params);
    check_spec(spec, p);
    const StateSpace space = StateSpace::enumerate(p);

    BaselineFixedPoint out;
    double prm = 0.0;
    for (int k = 0; k < opts.max_iterations; ++k) {
        out.model = build_model(p, space, prm);
        out.policy = baseline_policy(spec, *out.model);
        const auto pi = steady_state(*out.model, out.policy);
        out.rejection = rejection_probabilities(pi, out.policy, *out.model);
        out.p_reject_mr = prm;
        out.trace.push_back(prm);

        const double next = (1.0 - opts.damping) * prm + opts.damping * out.rejection.mr;
        if (std::abs(next - prm) < opts.tol) {
            out.converged = true;
            break;
        }
        prm = next;
    }
    out.gain = policy_gain(*out.model, out.policy, 0.0);
    return out;
}

} // namespace fmc
