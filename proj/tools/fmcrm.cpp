// fmcrm: solve, simulate and sweep the single-DC resource manager.

#include "fmc/compare.hpp"
#include "fmc/config.hpp"
#include "fmc/error.hpp"
#include "fmc/mobility.hpp"
#include "fmc/random.hpp"
#include "fmc/report.hpp"
#include "fmc/sim.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace fmc;

namespace {

enum Exit { kOk = 0, kValidation = 1, kSolver = 2, kSimAbort = 3, kCompareFailed = 4 };

struct Globals {
    std::string config_path;
    std::vector<std::string> sets;
    std::uint64_t seed = SimConfig{}.seed;
    std::string out = "out";
    std::string format = "csv";
    double rho = -1.0;
};

struct SimFlags {
    std::int64_t events = SimConfig{}.n_events;
    std::int64_t warmup = SimConfig{}.warmup_events;
    int replications = SimConfig{}.n_replications;
    std::string mode = "detailed";

    SimConfig make(std::uint64_t seed) const {
        SimConfig c;
        c.seed = seed;
        c.n_events = events;
        c.warmup_events = warmup;
        c.n_replications = replications;
        c.mode = parse_sim_mode(mode);
        check_config(c);
        return c;
    }
};

void add_sim_flags(CLI::App* cmd, SimFlags& f) {
    cmd->add_option("--events", f.events, "Decision epochs per replication (warmup included)");
    cmd->add_option("--warmup", f.warmup, "Epochs discarded before measuring");
    cmd->add_option("--replications", f.replications, "Independent replications");
    cmd->add_option("--mode", f.mode, "analytic | detailed")
        ->check(CLI::IsMember({"analytic", "detailed"}));
}

ModelParams load_params(const Globals& g) {
    ModelParams p = g.config_path.empty() ? ModelParams{} : load_config(g.config_path);
    for (const auto& kv : g.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + kv + "'");
        set_param(p, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return validate(p);
}

double effective_rho(const Globals& g, const ModelParams& p) {
    return g.rho >= 0.0 ? g.rho : rejection_threshold(p);
}

class Run {
public:
    Run(std::string command, const Globals& g, const ModelParams& p)
        : out_(g.out), start_(std::chrono::steady_clock::now()) {
        manifest_.command = std::move(command);
        manifest_.config = p;
        manifest_.seeds.push_back(g.seed);
        fs::create_directories(out_);
    }

    fs::path write(const std::string& name, const std::string& content) {
        const fs::path path = out_ / name;
        std::ofstream f(path, std::ios::binary);
        f << content;
        if (!f) throw Error("cannot write " + path.string());
        manifest_.outputs.push_back(path.string());
        return path;
    }

    void add_output(const fs::path& path) { manifest_.outputs.push_back(path.string()); }
    void add_seed(std::uint64_t s) { manifest_.seeds.push_back(s); }

    void finish() {
        manifest_.wall_clock_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        write_manifest(manifest_, out_ / (manifest_.command + ".manifest.json"));
    }

private:
    fs::path out_;
    RunManifest manifest_;
    std::chrono::steady_clock::time_point start_;
};

std::string rows_output(const std::vector<SweepRow>& rows, const std::string& format) {
    return format == "json" ? sweep_json(rows).append("\n") : sweep_csv(rows);
}

void record_replication_seeds(Run& run, const SimConfig& cfg) {
    for (int r = 0; r < cfg.n_replications; ++r) run.add_seed(derive_seed(cfg.seed, r));
}

int cmd_solve(const Globals& g) {
    const ModelParams p = load_params(g);
    const double rho = effective_rho(g, p);
    Run run("solve", g, p);
    const SolveOutcome s = fixed_point_solve(p, rho);
    run.write("solve.json", solve_document(p, rho, s).dump(2) + "\n");
    const std::string summary = policy_summary(s);
    run.write("policy.txt", summary);
    std::cout << summary;
    std::printf("theta %.6f  reward %.6f  beta %.6f  p_reject nr %.5f mr %.5f weighted %.5f (rho %.5f)\n",
                s.theta, s.reward_gain, s.beta, s.rejection.nr, s.rejection.mr,
                s.rejection.weighted, rho);
    if (!s.fixed_point_converged || !s.lagrange_converged)
        std::cerr << "warning: solver stopped at its iteration cap ("
                  << to_string(s.termination) << ")\n";
    run.finish();
    return kOk;
}

int cmd_simulate(const Globals& g, const SimFlags& f, const std::string& policy) {
    const ModelParams p = load_params(g);
    const PolicySpec spec = parse_policy(policy, p);
    check_spec(spec, p);
    const SimConfig cfg = f.make(g.seed);
    Run run("simulate", g, p);
    record_replication_seeds(run, cfg);

    const PreparedPolicy prepared = prepare_policy(spec, p, effective_rho(g, p));
    const SimResult res = run_simulation(p, decision_rule(prepared), cfg,
                                         prepared.model->context().stats, prepared.p_reject_mr);
    std::vector<SweepRow> rows;
    SweepRow base;
    base.lambda_n = p.lambda_n;
    base.policy = policy_name(spec);
    base.p_reject_mr_model = prepared.p_reject_mr;
    base.analytic_gain = prepared.analytic_gain;
    for (int r = 0; r < static_cast<int>(res.replications.size()); ++r) {
        SweepRow row = base;
        row.replication = r;
        row.metrics = res.replications[r];
        rows.push_back(row);
    }
    base.metrics = res.aggregate;
    rows.push_back(base);

    run.write("simulate." + g.format, rows_output(rows, g.format));
    const SimMetrics& m = res.aggregate;
    std::printf("reward %.5f ± %.5f (analytic %.5f)  p_reject nr %.5f mr %.5f  alloc nr %.3f mr %.3f\n",
                m.avg_reward_per_time, m.avg_reward_per_time_hw, prepared.analytic_gain,
                m.p_reject_nr, m.p_reject_mr, m.avg_alloc_nr, m.avg_alloc_mr);
    run.finish();
    return kOk;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ValidationError("bad number in list: '" + item + "'");
        }
    }
    return out;
}

int cmd_sweep(const Globals& g, const SimFlags& f, const std::string& lambdas,
              const std::vector<std::string>& policies) {
    const ModelParams p = load_params(g);
    SweepConfig cfg;
    cfg.lambdas = parse_list(lambdas);
    for (const auto& name : policies) cfg.policies.push_back(parse_policy(name, p));
    if (cfg.policies.empty()) throw ValidationError("sweep needs at least one policy");
    cfg.sim = f.make(g.seed);
    cfg.rho = g.rho;
    Run run("sweep", g, p);
    record_replication_seeds(run, cfg.sim);

    const std::vector<SweepRow> rows = sweep(p, cfg);
    run.write("sweep." + g.format, rows_output(rows, g.format));

    int failed = 0, cells = 0;
    for (const auto& r : rows) {
        if (r.replication >= 0) continue;
        ++cells;
        if (r.status != "ok") {
            ++failed;
            std::cerr << "lambda_n " << r.lambda_n << " " << r.policy << ": " << r.status << "\n";
        }
    }
    run.finish();
    std::printf("%d cells, %d failed\n", cells, failed);
    return failed == cells ? kSolver : kOk;
}

int cmd_compare(const Globals& g, const SimFlags& f, const std::string& policy, bool fault) {
    const ModelParams p = load_params(g);
    CompareOptions opts;
    opts.policy = parse_policy(policy, p);
    opts.rho = g.rho;
    opts.sim = f.make(g.seed);
    opts.inject_fault = fault;
    Run run("compare", g, p);
    record_replication_seeds(run, opts.sim);

    const std::vector<Check> checks = consistency_checks(p, opts);
    bool all = true;
    nlohmann::json doc = nlohmann::json::array();
    std::string csv = "check,passed,detail\n";
    for (const auto& c : checks) {
        all = all && c.passed;
        std::printf("%s %s: %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
        doc.push_back({{"check", c.name}, {"passed", c.passed}, {"detail", c.detail}});
        csv += c.name + "," + (c.passed ? "true" : "false") + ",\"" + c.detail + "\"\n";
    }
    run.write("compare." + g.format, g.format == "json" ? doc.dump(2) + "\n" : csv);
    run.finish();
    return all ? kOk : kCompareFailed;
}

int cmd_dump_model(const Globals& g, double p_rm) {
    const ModelParams p = load_params(g);
    Run run("dump-model", g, p);
    const auto space = StateSpace::enumerate(p);
    const auto model = build_model(p, space, p_rm);
    for (const auto& path : write_model_csv(*model, g.out)) run.add_output(path);
    std::printf("%d states, %d state-action pairs\n", model->num_states(), model->num_choices());
    run.finish();
    return kOk;
}

int cmd_dump_mobility(const Globals& g, double p_rm) {
    const ModelParams p = load_params(g);
    Run run("dump-mobility", g, p);
    const DistanceChain chain = build_distance_chain(p, p_rm);
    const DistanceStats stats = distance_statistics(chain);
    run.write("mobility.csv", mobility_csv(chain, stats));
    std::printf("mean distance %.6f  p_interrupt %.6f  P(d=D) %.6f\n", stats.mean_distance,
                stats.p_interrupt, stats.boundary());
    run.finish();
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Resource management for a follow-me-cloud data center"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config_path, "Parameter file (key = value lines)")
        ->check(CLI::ExistingFile);
    app.add_option("--set", g.sets, "Override a parameter, key=value (repeatable)");
    app.add_option("--seed", g.seed, "Master seed");
    app.add_option("--out", g.out, "Output directory");
    app.add_option("--format", g.format, "Tabular output format")
        ->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--rho", g.rho, "Rejection bound (default: weighted max_reject_*)");
    app.fallthrough();

    SimFlags sim;
    std::string policy = "smdp";
    std::string lambdas = "0.5,1,1.5,2,3,4";
    std::vector<std::string> policies = {"smdp", "greedy", "au", "fixed", "rrsv"};
    bool fault = false;
    double p_rm = 0.0;

    auto* solve = app.add_subcommand("solve", "Solve the constrained SMDP");
    auto* simulate = app.add_subcommand("simulate", "Simulate one policy");
    simulate->add_option("--policy", policy, "smdp | greedy | au | fixed[:c] | rrsv[:R,c]");
    add_sim_flags(simulate, sim);
    auto* sweep_cmd = app.add_subcommand("sweep", "All policies over a lambda_n grid");
    sweep_cmd->add_option("--lambdas", lambdas, "Comma-separated lambda_n values");
    sweep_cmd->add_option("--policies", policies, "Policies to run")->delimiter(',');
    add_sim_flags(sweep_cmd, sim);
    auto* compare = app.add_subcommand("compare", "Analytic vs simulated consistency checks");
    compare->add_option("--policy", policy, "Policy to check");
    compare->add_flag("--inject-fault", fault, "Corrupt one kernel entry before checking");
    add_sim_flags(compare, sim);
    auto* dump_model = app.add_subcommand("dump-model", "Write states, kernel and rewards as CSV");
    dump_model->add_option("--p-reject-mr", p_rm, "Neighbour MR rejection probability");
    auto* dump_mobility = app.add_subcommand("dump-mobility", "Write the distance chain as CSV");
    dump_mobility->add_option("--p-reject-mr", p_rm, "Neighbour MR rejection probability");

    // Compare defaults to the analytic simulator and a 10^6-event budget.
    compare->preparse_callback([&](std::size_t) {
        sim.mode = "analytic";
        sim.events = 110'000;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    try {
        if (*solve) return cmd_solve(g);
        if (*simulate) return cmd_simulate(g, sim, policy);
        if (*sweep_cmd) return cmd_sweep(g, sim, lambdas, policies);
        if (*compare) return cmd_compare(g, sim, policy, fault);
        if (*dump_model) return cmd_dump_model(g, p_rm);
        if (*dump_mobility) return cmd_dump_mobility(g, p_rm);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const SolverError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kSolver;
    } catch (const SimulationAbort& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kSimAbort;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidation;
    }
    return kOk;
}
