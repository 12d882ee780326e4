#pragma once

#include "fmc/config.hpp"
#include "fmc/solver.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

namespace fmc {

inline constexpr const char* kToolVersion = "1.0.0";

/// Solver result document: parameter echo, traces, policy table, gain and
/// value-vector summary.
nlohmann::json solve_document(const ModelParams& p, double rho, const SolveOutcome& s);

/// Human-readable summary: decisions at arrival states grouped by occupancy.
std::string policy_summary(const SolveOutcome& s);

nlohmann::json params_json(const ModelParams& p);

struct RunManifest {
    std::string command;
    ModelParams config;
    std::vector<std::uint64_t> seeds;
    std::string tool_version = kToolVersion;
    std::vector<std::string> outputs;
    double wall_clock_seconds = 0.0;

    bool operator==(const RunManifest&) const = default;
};

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

/// Writes the manifest next to the outputs; throws if a listed output is missing.
void write_manifest(const RunManifest& m, const std::filesystem::path& path);

} // namespace fmc
