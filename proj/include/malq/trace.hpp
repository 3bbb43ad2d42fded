#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "malq/graph.hpp"
#include "malq/qlearn.hpp"

namespace malq {

struct CommandEntry {
    std::vector<std::string> cmds;
    // Per-entry latency model overrides for the Simulate backend.
    std::optional<double> sim_median_s;
    std::optional<double> sim_sigma;
};

// state -> forensic command sequence for one investigation scenario.
struct CommandMap {
    std::string scenario_label;
    std::map<int, CommandEntry> entries;
};

// Parses and validates a command-map document against the paired graph's
// state count.
CommandMap load_command_map(std::istream& in, int state_count);
CommandMap load_command_map_file(const std::string& path, int state_count);

struct TrajectoryStep {
    int state = 0;
    int action = 0;
    int next_state = 0;

    friend bool operator==(const TrajectoryStep&, const TrajectoryStep&) = default;
};

struct Trajectory {
    std::vector<TrajectoryStep> steps;
    // "malware" / "benign" when a terminal was reached, "cap-reached" when
    // the step cap cut the walk short.
    std::string terminal_label;

    // States in visit order: each step's source, then the final state.
    std::vector<int> visited() const;
};

// Walks the graph from the initial state following policy actions,
// sampling stochastic outcomes with a stream seeded by `seed`, until a
// terminal or `step_cap` steps. Undefined policy actions self-loop.
Trajectory build_trajectory(const WorkflowGraph& graph, const Policy& policy,
                            std::uint64_t seed, int step_cap);

enum class ExecBackend { Simulate, Shell };

struct TimingPoint {
    std::string command;
    int state = 0;
    double duration_s = 0.0;
    // Exit code of the spawned command; absent for simulated runs.
    std::optional<int> exit_code;
};

struct TimingSeries {
    std::string scenario_label;
    std::vector<TimingPoint> points;
};

inline constexpr double kDefaultSimMedianSeconds = 0.5;
inline constexpr double kDefaultSimSigma = 0.5;

// Runs every mapped command of every visited state, in visit order.
// Simulate draws log-normal latencies from a stream seeded by `seed`;
// Shell spawns each command via the system shell and records wall-clock
// time and exit status (spawn failures are recorded, never fatal).
TimingSeries execute_trajectory(const Trajectory& trajectory, const CommandMap& map,
                                ExecBackend backend, std::uint64_t seed);

}  // namespace malq
