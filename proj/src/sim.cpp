#include "fmc/sim.hpp"

#include "fmc/error.hpp"
#include "fmc/random.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <limits>

namespace fmc {

std::string to_string(SimMode m) { return m == SimMode::Analytic ? "analytic" : "detailed"; }

SimMode parse_sim_mode(const std::string& s) {
    if (s == "analytic") return SimMode::Analytic;
    if (s == "detailed") return SimMode::Detailed;
    throw ValidationError("unknown simulation mode '" + s + "' (expected analytic|detailed)");
}

void check_config(const SimConfig& cfg) {
    if (cfg.warmup_events < 0 || cfg.warmup_events >= cfg.n_events)
        throw ValidationError("warmup_events must lie in [0, n_events)");
    if (cfg.n_replications < 1) throw ValidationError("n_replications must be >= 1");
}

namespace {

struct Dc {
    const ModelParams& p;
    std::vector<ServiceRecord> services;
    SystemState state;  // counts mirror `services`
    int units = 0;
    int remote = 0;
    long remote_distance = 0;

    explicit Dc(const ModelParams& params) : p(params) {
        state.local.assign(p.max_alloc_C, 0);
        state.remote.assign(p.max_alloc_C, 0);
    }

    void add(ServiceRecord r) {
        units += r.alloc;
        if (r.kind == ServiceRecord::Kind::Local) {
            ++state.local[r.alloc - 1];
        } else {
            ++state.remote[r.alloc - 1];
            ++remote;
            remote_distance += r.distance;
        }
        services.push_back(r);
    }

    void remove(std::size_t i) {
        const auto& r = services[i];
        units -= r.alloc;
        if (r.kind == ServiceRecord::Kind::Local) {
            --state.local[r.alloc - 1];
        } else {
            --state.remote[r.alloc - 1];
            --remote;
            remote_distance -= r.distance;
        }
        services[i] = services.back();
        services.pop_back();
    }

    void make_remote(std::size_t i, int distance) {
        auto& r = services[i];
        --state.local[r.alloc - 1];
        ++state.remote[r.alloc - 1];
        ++remote;
        remote_distance += distance;
        r.kind = ServiceRecord::Kind::Remote;
        r.distance = distance;
    }

    void make_local(std::size_t i) {
        auto& r = services[i];
        --state.remote[r.alloc - 1];
        ++state.local[r.alloc - 1];
        --remote;
        remote_distance -= r.distance;
        r.kind = ServiceRecord::Kind::Local;
        r.distance = 0;
    }

    void shift_distance(std::size_t i, int delta) {
        services[i].distance += delta;
        remote_distance += delta;
    }
};

double mean_or_nan(double sum, std::uint64_t n) {
    return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

} // namespace

SimMetrics run_replication(const ModelParams& p, const DecisionRule& rule, const SimConfig& cfg,
                           const DistanceStats& stats, double p_reject_mr, int replication) {
    check_config(cfg);
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(replication)));
    const bool analytic = cfg.mode == SimMode::Analytic;
    const double lambda_m = mr_arrival_rate(p);
    const double per_service = p.mu + p.p_m;
    const double d_bar = stats.mean_distance;
    const double move_income = p.income_migrate * (1.0 - p_reject_mr);
    const double mr_reject_loss = (p.loss_interrupt / 2.0) * stats.boundary();

    Dc dc(p);
    double lumps = 0.0, cost = 0.0, time = 0.0, clock = 0.0;
    double distance_area = 0.0, service_area = 0.0;
    double alloc_nr = 0.0, alloc_mr = 0.0;
    std::uint64_t accepted_nr = 0, accepted_mr = 0;
    SimMetrics m;

    auto cost_now = [&] {
        const double delay = analytic ? d_bar * dc.remote : static_cast<double>(dc.remote_distance);
        return p.weight_delay * delay + p.weight_occupancy * p.price_resource * dc.units;
    };
    auto accrue = [&](bool measure) {
        const double n = static_cast<double>(dc.services.size());
        const double dt = rng.exponential(p.lambda_n + lambda_m + per_service * n);
        clock += dt;
        if (!measure) return;
        cost += cost_now() * dt;
        time += dt;
        distance_area +=
            (analytic ? d_bar * dc.remote : static_cast<double>(dc.remote_distance)) * dt;
        service_area += n * dt;
    };
    auto decide = [&](Event e) {
        dc.state.event = e;
        if (cfg.observer) cfg.observer(clock, dc.state);
        const Action a = rule(dc.state);
        if (!is_feasible(dc.state, a, p))
            throw SimulationAbort("decision rule returned infeasible action " + a.label() +
                                  " in state " + dc.state.label());
        return a;
    };

    for (std::int64_t epoch = 1; epoch <= cfg.n_events; ++epoch) {
        accrue(epoch - 1 > cfg.warmup_events);
        const bool measure = epoch > cfg.warmup_events;

        const double n = static_cast<double>(dc.services.size());
        const double u = rng.uniform() * (p.lambda_n + lambda_m + per_service * n);
        if (u < p.lambda_n) {
            const Action a = decide(Event::arrival_nr());
            if (measure) ++m.nr_arrivals;
            if (a.is_reject()) {
                if (measure) {
                    ++m.nr_rejected;
                    lumps -= p.loss_reject_nr;
                }
            } else {
                dc.add({ServiceRecord::Kind::Local, a.units(), 0, ServiceRecord::Origin::NewRequest});
                if (measure) {
                    ++accepted_nr;
                    alloc_nr += a.units();
                }
            }
        } else if (u < p.lambda_n + lambda_m) {
            const Action a = decide(Event::arrival_mr());
            if (measure) ++m.mr_arrivals;
            if (a.is_reject()) {
                if (measure) {
                    ++m.mr_rejected;
                    lumps -= mr_reject_loss;
                }
            } else {
                dc.add({ServiceRecord::Kind::Local, a.units(), 0, ServiceRecord::Origin::Migration});
                if (measure) {
                    ++accepted_mr;
                    alloc_mr += a.units();
                    lumps -= p.cost_migrate;
                }
            }
        } else {
            const double r = u - p.lambda_n - lambda_m;
            const std::size_t i = std::min(dc.services.size() - 1,
                                           static_cast<std::size_t>(r / per_service));
            const bool finishes = r - static_cast<double>(i) * per_service < p.mu;
            if (finishes) {
                if (measure) lumps += p.income_finish;
                dc.remove(i);
            } else {
                const bool migrated = rng.uniform() >= p_reject_mr;
                const bool is_local = dc.services[i].kind == ServiceRecord::Kind::Local;
                if (analytic && measure) lumps += move_income;
                if (migrated) {
                    if (!analytic && measure) lumps += p.income_migrate;
                    dc.remove(i);
                } else if (is_local) {
                    dc.make_remote(i, 1);
                } else if (!analytic) {
                    const double v = rng.uniform();
                    const int d = dc.services[i].distance;
                    if (v < 1.0 / 6.0) {
                        if (d == 1)
                            dc.make_local(i);
                        else
                            dc.shift_distance(i, -1);
                    } else if (v < 4.0 / 6.0) {
                        if (d + 1 > p.max_distance_D) {
                            dc.remove(i);
                            if (measure) {
                                ++m.interruptions;
                                lumps -= p.loss_interrupt;
                            }
                        } else {
                            dc.shift_distance(i, +1);
                        }
                    }
                }
            }
        }
        if (dc.units > p.capacity_B)
            throw SimulationAbort("capacity exceeded in state " + dc.state.label());
    }
    accrue(true);

    m.elapsed = time;
    m.avg_reward_per_time = (lumps - cost) / time;
    m.p_reject_nr = mean_or_nan(static_cast<double>(m.nr_rejected), m.nr_arrivals);
    m.p_reject_mr = mean_or_nan(static_cast<double>(m.mr_rejected), m.mr_arrivals);
    m.avg_alloc_nr = mean_or_nan(alloc_nr, accepted_nr);
    m.avg_alloc_mr = mean_or_nan(alloc_mr, accepted_mr);
    m.avg_distance = service_area > 0.0 ? distance_area / service_area : 0.0;
    m.interruption_rate = static_cast<double>(m.interruptions) / time;
    return m;
}

SimMetrics aggregate(const std::vector<SimMetrics>& reps) {
    SimMetrics out;
    const auto fold = [&](double SimMetrics::*value, double SimMetrics::*hw) {
        double sum = 0.0, sum2 = 0.0;
        int n = 0;
        for (const auto& r : reps) {
            const double v = r.*value;
            if (std::isnan(v)) continue;
            sum += v;
            sum2 += v * v;
            ++n;
        }
        if (n == 0) {
            out.*value = std::numeric_limits<double>::quiet_NaN();
            return;
        }
        const double mean = sum / n;
        out.*value = mean;
        if (n > 1) {
            const double var = std::max(0.0, (sum2 - n * mean * mean) / (n - 1));
            out.*hw = 1.96 * std::sqrt(var / n);
        }
    };
    fold(&SimMetrics::avg_reward_per_time, &SimMetrics::avg_reward_per_time_hw);
    fold(&SimMetrics::p_reject_nr, &SimMetrics::p_reject_nr_hw);
    fold(&SimMetrics::p_reject_mr, &SimMetrics::p_reject_mr_hw);
    fold(&SimMetrics::avg_alloc_nr, &SimMetrics::avg_alloc_nr_hw);
    fold(&SimMetrics::avg_alloc_mr, &SimMetrics::avg_alloc_mr_hw);
    fold(&SimMetrics::avg_distance, &SimMetrics::avg_distance_hw);
    fold(&SimMetrics::interruption_rate, &SimMetrics::interruption_rate_hw);
    for (const auto& r : reps) {
        out.nr_arrivals += r.nr_arrivals;
        out.nr_rejected += r.nr_rejected;
        out.mr_arrivals += r.mr_arrivals;
        out.mr_rejected += r.mr_rejected;
        out.interruptions += r.interruptions;
        out.elapsed += r.elapsed;
    }
    return out;
}

SimResult run_simulation(const ModelParams& p, const DecisionRule& rule, const SimConfig& cfg,
                         const DistanceStats& stats, double p_reject_mr) {
    check_config(cfg);
    SimResult res;
    res.replications.resize(cfg.n_replications);
    std::vector<std::string> errors(cfg.n_replications);

    // Replications are independent streams; results land in index order.
#pragma omp parallel for schedule(dynamic, 1) if (cfg.parallel)
    for (int r = 0; r < cfg.n_replications; ++r) {
        try {
            res.replications[r] = run_replication(p, rule, cfg, stats, p_reject_mr, r);
        } catch (const std::exception& e) {
            errors[r] = e.what();
        }
    }
    for (const auto& e : errors)
        if (!e.empty()) throw SimulationAbort(e);
    res.aggregate = aggregate(res.replications);
    return res;
}

// ---------------------------------------------------------------------------

PreparedPolicy prepare_policy(const PolicySpec& spec, const ModelParams& p, double rho,
                              const FixedPointOptions& opts) {
    PreparedPolicy out;
    out.spec = spec;
    if (std::holds_alternative<SmdpSpec>(spec)) {
        SolveOutcome s = fixed_point_solve(p, rho, opts);
        out.model = s.model;
        out.policy = std::make_shared<const Policy>(std::move(s.policy));
        out.p_reject_mr = s.p_reject_mr_model;
        out.analytic_gain = s.reward_gain;
        out.analytic_rejection = s.rejection;
        out.converged = s.fixed_point_converged;
        out.beta = s.beta;
        return out;
    }
    BaselineFixedPoint b = baseline_fixed_point(spec, p, opts);
    out.model = b.model;
    out.policy = std::make_shared<const Policy>(std::move(b.policy));
    out.p_reject_mr = b.p_reject_mr;
    out.analytic_gain = b.gain;
    out.analytic_rejection = b.rejection;
    out.converged = b.converged;
    return out;
}

DecisionRule decision_rule(const PreparedPolicy& prepared) {
    auto space = std::shared_ptr<const StateSpace>(prepared.model, &prepared.model->space());
    return rule_from_policy(prepared.policy, std::move(space));
}

std::vector<SweepRow> sweep(const ModelParams& base, const SweepConfig& cfg) {
    if (cfg.lambdas.empty()) throw ValidationError("sweep needs at least one lambda_n value");
    for (double l : cfg.lambdas)
        if (!(l > 0.0)) throw ValidationError("sweep lambda_n values must be > 0");
    check_config(cfg.sim);

    std::vector<SweepRow> rows;
    for (double lambda : cfg.lambdas) {
        ModelParams p = base;
        p.lambda_n = lambda;
        const double rho = cfg.rho >= 0.0 ? cfg.rho : rejection_threshold(p);
        for (const auto& spec : cfg.policies) {
            SweepRow agg;
            agg.lambda_n = lambda;
            agg.policy = policy_name(spec);
            try {
                const PreparedPolicy prepared = prepare_policy(spec, validate(p), rho, cfg.solve);
                const SimResult res = run_simulation(p, decision_rule(prepared), cfg.sim,
                                                     prepared.model->context().stats,
                                                     prepared.p_reject_mr);
                for (int r = 0; r < static_cast<int>(res.replications.size()); ++r) {
                    SweepRow row = agg;
                    row.replication = r;
                    row.metrics = res.replications[r];
                    row.p_reject_mr_model = prepared.p_reject_mr;
                    row.analytic_gain = prepared.analytic_gain;
                    rows.push_back(std::move(row));
                }
                agg.metrics = res.aggregate;
                agg.p_reject_mr_model = prepared.p_reject_mr;
                agg.analytic_gain = prepared.analytic_gain;
                if (!prepared.converged) agg.status = "fixed_point_not_converged";
            } catch (const std::exception& e) {
                agg.status = std::string("error: ") + e.what();
                agg.metrics = SimMetrics{};
                agg.metrics.avg_reward_per_time = std::numeric_limits<double>::quiet_NaN();
            }
            rows.push_back(std::move(agg));
        }
    }
    return rows;
}

std::vector<std::string> sweep_columns() {
    return {"lambda_n",           "policy",
            "replication",        "avg_reward_per_time",
            "p_reject_nr",        "p_reject_mr",
            "avg_alloc_nr",       "avg_alloc_mr",
            "avg_distance",       "interruption_rate",
            "avg_reward_per_time_hw", "p_reject_nr_hw",
            "p_reject_mr_hw",     "avg_alloc_nr_hw",
            "avg_alloc_mr_hw",    "avg_distance_hw",
            "interruption_rate_hw", "p_reject_mr_model",
            "analytic_gain",      "status"};
}

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

} // namespace

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out;
    const auto cols = sweep_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
    out += '\n';
    for (const auto& r : rows) {
        const auto& m = r.metrics;
        const std::vector<std::string> fields = {
            num(r.lambda_n),
            csv_field(r.policy),
            r.replication < 0 ? "all" : std::to_string(r.replication),
            num(m.avg_reward_per_time),
            num(m.p_reject_nr),
            num(m.p_reject_mr),
            num(m.avg_alloc_nr),
            num(m.avg_alloc_mr),
            num(m.avg_distance),
            num(m.interruption_rate),
            num(m.avg_reward_per_time_hw),
            num(m.p_reject_nr_hw),
            num(m.p_reject_mr_hw),
            num(m.avg_alloc_nr_hw),
            num(m.avg_alloc_mr_hw),
            num(m.avg_distance_hw),
            num(m.interruption_rate_hw),
            num(r.p_reject_mr_model),
            num(r.analytic_gain),
            csv_field(r.status),
        };
        for (std::size_t i = 0; i < fields.size(); ++i) out += (i ? "," : "") + fields[i];
        out += '\n';
    }
    return out;
}

std::string sweep_json(const std::vector<SweepRow>& rows) {
    auto finite = [](double v) -> nlohmann::json {
        return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
    };
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) {
        const auto& m = r.metrics;
        arr.push_back({
            {"lambda_n", r.lambda_n},
            {"policy", r.policy},
            {"replication", r.replication < 0 ? nlohmann::json("all") : nlohmann::json(r.replication)},
            {"avg_reward_per_time", finite(m.avg_reward_per_time)},
            {"p_reject_nr", finite(m.p_reject_nr)},
            {"p_reject_mr", finite(m.p_reject_mr)},
            {"avg_alloc_nr", finite(m.avg_alloc_nr)},
            {"avg_alloc_mr", finite(m.avg_alloc_mr)},
            {"avg_distance", finite(m.avg_distance)},
            {"interruption_rate", finite(m.interruption_rate)},
            {"avg_reward_per_time_hw", finite(m.avg_reward_per_time_hw)},
            {"p_reject_nr_hw", finite(m.p_reject_nr_hw)},
            {"p_reject_mr_hw", finite(m.p_reject_mr_hw)},
            {"avg_alloc_nr_hw", finite(m.avg_alloc_nr_hw)},
            {"avg_alloc_mr_hw", finite(m.avg_alloc_mr_hw)},
            {"avg_distance_hw", finite(m.avg_distance_hw)},
            {"interruption_rate_hw", finite(m.interruption_rate_hw)},
            {"p_reject_mr_model", finite(r.p_reject_mr_model)},
            {"analytic_gain", finite(r.analytic_gain)},
            {"status", r.status},
        });
    }
    return arr.dump(2) + "\n";
}

} // namespace fmc
