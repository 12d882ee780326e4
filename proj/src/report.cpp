#include "fmc/report.hpp"

#include "fmc/error.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace fmc {

nlohmann::json params_json(const ModelParams& p) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& key : config_keys()) {
        const std::string v = get_param(p, key);
        if (key == "capacity_B" || key == "max_alloc_C" || key == "max_distance_D")
            j[key] = std::stoi(v);
        else
            j[key] = std::stod(v);
    }
    return j;
}

nlohmann::json solve_document(const ModelParams& p, double rho, const SolveOutcome& s) {
    nlohmann::json doc;
    doc["params"] = params_json(p);
    doc["rho"] = rho;
    doc["theta"] = s.theta;
    doc["reward_gain"] = s.reward_gain;
    doc["beta"] = s.beta;
    doc["p_reject"] = {{"nr", s.rejection.nr},
                       {"mr", s.rejection.mr},
                       {"weighted", s.rejection.weighted}};
    doc["p_reject_mr_model"] = s.p_reject_mr_model;
    doc["distance"] = {{"by_distance", s.stats.by_distance},
                       {"mean_distance", s.stats.mean_distance},
                       {"p_interrupt", s.stats.p_interrupt}};

    nlohmann::json beta_trace = nlohmann::json::array();
    nlohmann::json pr_trace = nlohmann::json::array();
    for (const auto& step : s.beta_trace) {
        beta_trace.push_back(step.beta);
        pr_trace.push_back(step.weighted);
    }
    doc["beta_trace"] = beta_trace;
    doc["p_reject_trace"] = pr_trace;
    doc["fixed_point_trace"] = s.fixed_point_trace;
    doc["diagnostics"] = {{"termination", to_string(s.termination)},
                          {"lagrange_converged", s.lagrange_converged},
                          {"fixed_point_converged", s.fixed_point_converged},
                          {"rvi_iterations", s.rvi_iterations},
                          {"rvi_residual", s.rvi_residual},
                          {"num_states", s.model ? s.model->num_states() : 0}};

    const auto& v = s.values;
    if (!v.empty()) {
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        doc["values"] = {{"min", *lo},
                         {"max", *hi},
                         {"mean", std::accumulate(v.begin(), v.end(), 0.0) / v.size()}};
    }

    nlohmann::json table = nlohmann::json::object();
    if (s.model) {
        const auto& space = s.model->space();
        for (int i = 0; i < space.size(); ++i)
            if (space[i].event.is_arrival()) table[space[i].label()] = s.policy[i].label();
    }
    doc["policy"] = table;
    return doc;
}

std::string policy_summary(const SolveOutcome& s) {
    std::ostringstream out;
    out << "theta " << s.theta << "  reward gain " << s.reward_gain << "  beta " << s.beta
        << "\np_reject nr " << s.rejection.nr << "  mr " << s.rejection.mr << "  weighted "
        << s.rejection.weighted << "\n";
    if (!s.model) return out.str();

    // Action frequencies at arrival states, by occupied units.
    const auto& space = s.model->space();
    const int B = s.model->context().params.capacity_B;
    for (const auto kind : {EventKind::ArrivalNR, EventKind::ArrivalMR}) {
        out << (kind == EventKind::ArrivalNR ? "NR" : "MR") << " decisions by occupancy:\n";
        for (int u = 0; u <= B; ++u) {
            std::map<std::string, int> counts;
            for (int i = 0; i < space.size(); ++i)
                if (space[i].event.kind == kind && occupied(space[i]) == u)
                    ++counts[s.policy[i].label()];
            if (counts.empty()) continue;
            out << "  occupied " << u << ":";
            for (const auto& [label, n] : counts) out << ' ' << label << 'x' << n;
            out << '\n';
        }
    }
    return out.str();
}

nlohmann::json to_json(const RunManifest& m) {
    return {{"command", m.command},
            {"config", to_config_text(m.config)},
            {"seeds", m.seeds},
            {"tool_version", m.tool_version},
            {"outputs", m.outputs},
            {"wall_clock_seconds", m.wall_clock_seconds}};
}

RunManifest manifest_from_json(const nlohmann::json& j) {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.config = parse_config(j.at("config").get<std::string>());
    m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    m.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
    return m;
}

void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
    for (const auto& o : m.outputs)
        if (!std::filesystem::exists(o)) throw Error("manifest output missing: " + o);
    std::ofstream out(path);
    out << to_json(m).dump(2) << '\n';
    if (!out) throw Error("cannot write manifest " + path.string());
}

} // namespace fmc
