#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace malq {

inline constexpr const char* kToolVersion = "0.1.0";

// Reproducibility record written next to every file a subcommand produces.
// `malq replay --manifest <file>` re-dispatches argv and regenerates the
// same bytes (training and Simulate outputs; wall-clock Shell timings are
// inherently unrepeatable).
struct RunManifest {
    std::string tool_version = kToolVersion;
    std::string command;             // human-readable command line
    std::vector<std::string> argv;   // exact tokens for replay
    std::string graph_file;          // empty when no graph was involved
    nlohmann::ordered_json config_values;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> output_paths;
};

std::string manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const std::string& text);

std::string manifest_path_for(const std::string& output_path);

// Write-then-rename; partially written files are never observable.
void atomic_write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace malq
