#include "malq/trace.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

#include "malq/rng.hpp"

namespace malq {

namespace {

using nlohmann::json;

}  // namespace

CommandMap load_command_map(std::istream& in, int state_count) {
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("command map is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("command map must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        (void)value;
        if (key != "scenario" && key != "commands") {
            throw ParseError("unknown key \"" + key + "\" in command map");
        }
    }
    if (!doc.contains("scenario") || !doc.at("scenario").is_string()) {
        throw ParseError("command map needs a string \"scenario\"");
    }
    if (!doc.contains("commands") || !doc.at("commands").is_array()) {
        throw ParseError("command map needs a \"commands\" array");
    }

    CommandMap map;
    map.scenario_label = doc.at("scenario").get<std::string>();
    for (const json& entry : doc.at("commands")) {
        if (!entry.is_object()) throw ParseError("command entries must be objects");
        for (const auto& [key, value] : entry.items()) {
            (void)value;
            if (key != "state" && key != "cmds" && key != "sim_median_s" && key != "sim_sigma") {
                throw ParseError("unknown key \"" + key + "\" in command entry");
            }
        }
        if (!entry.contains("state") || !entry.at("state").is_number_integer()) {
            throw ParseError("command entry needs an integer \"state\"");
        }
        int state = entry.at("state").get<int>();
        if (state < 0 || state >= state_count) {
            throw ValidationError("command map state " + std::to_string(state) +
                                  " outside [0, " + std::to_string(state_count) + ")");
        }
        if (map.entries.count(state)) {
            throw ValidationError("command map lists state " + std::to_string(state) + " twice");
        }
        if (!entry.contains("cmds") || !entry.at("cmds").is_array() || entry.at("cmds").empty()) {
            throw ParseError("command entry for state " + std::to_string(state) +
                             " needs a non-empty \"cmds\" array");
        }
        CommandEntry ce;
        for (const json& cmd : entry.at("cmds")) {
            if (!cmd.is_string() || cmd.get<std::string>().empty()) {
                throw ValidationError("empty command string at state " + std::to_string(state));
            }
            ce.cmds.push_back(cmd.get<std::string>());
        }
        if (entry.contains("sim_median_s")) {
            double m = entry.at("sim_median_s").get<double>();
            if (!(m > 0.0)) {
                throw ValidationError("sim_median_s must be positive at state " +
                                      std::to_string(state));
            }
            ce.sim_median_s = m;
        }
        if (entry.contains("sim_sigma")) {
            double s = entry.at("sim_sigma").get<double>();
            if (s < 0.0) {
                throw ValidationError("sim_sigma must be >= 0 at state " + std::to_string(state));
            }
            ce.sim_sigma = s;
        }
        map.entries.emplace(state, std::move(ce));
    }
    return map;
}

CommandMap load_command_map_file(const std::string& path, int state_count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open command map: " + path);
    return load_command_map(in, state_count);
}

std::vector<int> Trajectory::visited() const {
    std::vector<int> out;
    if (steps.empty()) return out;
    out.reserve(steps.size() + 1);
    for (const TrajectoryStep& s : steps) out.push_back(s.state);
    out.push_back(steps.back().next_state);
    return out;
}

Trajectory build_trajectory(const WorkflowGraph& graph, const Policy& policy,
                            std::uint64_t seed, int step_cap) {
    if (static_cast<int>(policy.actions.size()) != graph.state_count) {
        throw std::invalid_argument("policy length does not match state_count");
    }
    if (step_cap <= 0) throw std::invalid_argument("step_cap must be positive");

    Trajectory out;
    SplitMix64 rng(seed);
    int state = graph.initial_state;
    for (int step = 0; step < step_cap; ++step) {
        if (graph.is_terminal(state)) break;
        int action = policy.actions[state];
        const std::vector<Outcome>* outcomes = graph.outcomes(state, action);
        int next = state;  // undefined action: self-loop
        if (outcomes != nullptr) {
            const Outcome* chosen = &outcomes->front();
            if (outcomes->size() > 1) {
                double u = rng.uniform01();
                double cumulative = 0.0;
                for (const Outcome& o : *outcomes) {
                    cumulative += o.probability;
                    chosen = &o;
                    if (u < cumulative) break;
                }
            }
            next = chosen->next_state;
        }
        out.steps.push_back({state, action, next});
        state = next;
    }
    if (graph.is_terminal(state)) {
        out.terminal_label = to_string(graph.terminals.at(state));
    } else {
        out.terminal_label = "cap-reached";
    }
    return out;
}

namespace {

double standard_normal(SplitMix64& rng) {
    // Box-Muller; pinned here for the same reproducibility reasons as the
    // generator itself.
    double u1 = rng.uniform01_pos();
    double u2 = rng.uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

TimingPoint simulate_command(const std::string& cmd, int state, const CommandEntry& entry,
                             SplitMix64& rng) {
    double median = entry.sim_median_s.value_or(kDefaultSimMedianSeconds);
    double sigma = entry.sim_sigma.value_or(kDefaultSimSigma);
    double duration = std::exp(std::log(median) + sigma * standard_normal(rng));
    return {cmd, state, duration, std::nullopt};
}

TimingPoint shell_command(const std::string& cmd, int state) {
    auto t0 = std::chrono::steady_clock::now();
    int status = std::system(cmd.c_str());
    auto t1 = std::chrono::steady_clock::now();
    double elapsed = std::chrono::duration<double>(t1 - t0).count();

    int code;
    if (status == -1) {
        code = -1;  // could not spawn a shell
#ifdef _WIN32
    } else {
        code = status;
#else
    } else if (WIFEXITED(status)) {
        code = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
        code = 128 + WTERMSIG(status);
    } else {
        code = -1;
#endif
    }
    return {cmd, state, elapsed, code};
}

}  // namespace

TimingSeries execute_trajectory(const Trajectory& trajectory, const CommandMap& map,
                                ExecBackend backend, std::uint64_t seed) {
    TimingSeries series;
    series.scenario_label = map.scenario_label;
    SplitMix64 rng(derive_seed(seed, 0x74696d65));  // timing stream

    for (int state : trajectory.visited()) {
        auto entry = map.entries.find(state);
        if (entry == map.entries.end()) continue;
        for (const std::string& cmd : entry->second.cmds) {
            series.points.push_back(backend == ExecBackend::Simulate
                                        ? simulate_command(cmd, state, entry->second, rng)
                                        : shell_command(cmd, state));
        }
    }
    return series;
}

}  // namespace malq
