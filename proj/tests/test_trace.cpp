#include <doctest.h>

#include <set>
#include <sstream>

#include "malq/sweep.hpp"
#include "malq/trace.hpp"
#include "test_helpers.hpp"

using namespace malq;
using malq::testing::make_chain_graph;

namespace {

CommandMap parse_map(const std::string& text, int state_count) {
    std::istringstream in(text);
    return load_command_map(in, state_count);
}

const char* kScenarioMap = R"({
  "scenario": "WannaCry",
  "commands": [
    {"state": 0, "cmds": ["git clone https://example.invalid/triage-scripts.git"]},
    {"state": 10, "cmds": ["systeminfo", "reg query HKLM\\SOFTWARE"],
     "sim_median_s": 0.2, "sim_sigma": 0.1}
  ]
})";

}  // namespace

TEST_CASE("command map loading") {
    CommandMap map = parse_map(kScenarioMap, 67);
    CHECK(map.scenario_label == "WannaCry");
    CHECK(map.entries.size() == 2);
    CHECK(map.entries.at(0).cmds.size() == 1);
    CHECK(map.entries.at(10).cmds.size() == 2);
    CHECK(map.entries.at(10).sim_median_s == 0.2);

    SUBCASE("state beyond the paired graph is rejected") {
        std::string bad = R"({"scenario": "x", "commands": [
          {"state": 99, "cmds": ["echo hi"]}]})";
        CHECK_THROWS_WITH_AS(parse_map(bad, 67), doctest::Contains("99"), ValidationError);
    }
    SUBCASE("empty command strings are rejected") {
        std::string bad = R"({"scenario": "x", "commands": [
          {"state": 1, "cmds": [""]}]})";
        CHECK_THROWS_AS(parse_map(bad, 67), ValidationError);
    }
    SUBCASE("duplicate states are rejected") {
        std::string bad = R"({"scenario": "x", "commands": [
          {"state": 1, "cmds": ["a"]}, {"state": 1, "cmds": ["b"]}]})";
        CHECK_THROWS_AS(parse_map(bad, 67), ValidationError);
    }
    SUBCASE("unknown keys are rejected") {
        std::string bad = R"({"scenario": "x", "commands": [], "notes": "?"})";
        CHECK_THROWS_AS(parse_map(bad, 67), ParseError);
    }
}

TEST_CASE("trajectories follow the policy along the chain") {
    WorkflowGraph g = make_chain_graph(4, 2);
    Policy policy{{0, 0, 0, 0}};
    Trajectory t = build_trajectory(g, policy, 0, 100);
    REQUIRE(t.steps.size() == 3);
    CHECK(t.visited() == std::vector<int>{0, 1, 2, 3});
    CHECK(t.terminal_label == "malware");
}

TEST_CASE("undefined policy actions self-loop until the cap") {
    WorkflowGraph g = make_chain_graph(4, 3);
    Policy policy{{2, 0, 0, 0}};  // action 2 undefined at state 0
    Trajectory t = build_trajectory(g, policy, 0, 25);
    CHECK(t.steps.size() == 25);
    CHECK(t.terminal_label == "cap-reached");
    for (const TrajectoryStep& s : t.steps) {
        CHECK(s.state == 0);
        CHECK(s.next_state == 0);
    }
}

TEST_CASE("trajectory steps chain" * doctest::description("property")) {
    SplitMix64 rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        WorkflowGraph g = malq::testing::random_graph(rng, false);
        Policy policy;
        for (int s = 0; s < g.state_count; ++s) {
            policy.actions.push_back(static_cast<int>(rng.uniform_int(g.action_space_size)));
        }
        Trajectory t = build_trajectory(g, policy, rng.next(), 50);
        for (std::size_t k = 0; k + 1 < t.steps.size(); ++k) {
            CHECK(t.steps[k].next_state == t.steps[k + 1].state);
        }
        if (t.terminal_label != "cap-reached") {
            CHECK(g.is_terminal(t.steps.back().next_state));
        }
    }
}

TEST_CASE("trajectories are deterministic per seed") {
    WorkflowGraph g = generate_default_graph(0);
    auto [v, ideal] = value_iteration(g, EnvVariant::defaults(VariantKind::RewardShaped), 0.9,
                                      1e-10);
    (void)v;
    Policy policy{ideal.actions};
    Trajectory a = build_trajectory(g, policy, 5, 500);
    Trajectory b = build_trajectory(g, policy, 5, 500);
    CHECK(a.steps == b.steps);
    CHECK(a.terminal_label == b.terminal_label);

    // oracle policy reaches a terminal well inside one pass over the states
    CHECK(a.terminal_label != "cap-reached");
    CHECK(a.steps.size() <= 67);
}

TEST_CASE("simulated execution is reproducible and positive") {
    WorkflowGraph g = make_chain_graph(12, 2);
    Policy policy{std::vector<int>(12, 0)};
    Trajectory t = build_trajectory(g, policy, 0, 100);

    std::string map_text = R"({"scenario": "Cerber", "commands": [
      {"state": 0, "cmds": ["echo acquire"]},
      {"state": 3, "cmds": ["echo pslist", "echo dlllist"]},
      {"state": 11, "cmds": ["echo compare"]}]})";
    CommandMap map = parse_map(map_text, 12);

    TimingSeries s1 = execute_trajectory(t, map, ExecBackend::Simulate, 9);
    TimingSeries s2 = execute_trajectory(t, map, ExecBackend::Simulate, 9);
    REQUIRE(s1.points.size() == 4);  // states 0, 3 (x2), 11 all visited once
    CHECK(s1.scenario_label == "Cerber");
    for (std::size_t i = 0; i < s1.points.size(); ++i) {
        CHECK(s1.points[i].duration_s == s2.points[i].duration_s);
        CHECK(s1.points[i].duration_s > 0.0);
        CHECK_FALSE(s1.points[i].exit_code.has_value());
    }

    TimingSeries s3 = execute_trajectory(t, map, ExecBackend::Simulate, 10);
    CHECK(s1.points[0].duration_s != s3.points[0].duration_s);
}

TEST_CASE("series length counts every visit of a mapped state") {
    // A self-looping policy revisits state 0, so its command runs each time.
    WorkflowGraph g = make_chain_graph(3, 2);
    Policy looping{{1, 0, 0}};  // undefined at state 0
    Trajectory t = build_trajectory(g, looping, 0, 4);
    CommandMap map = parse_map(R"({"scenario": "x", "commands": [
      {"state": 0, "cmds": ["echo probe"]}]})", 3);
    TimingSeries series = execute_trajectory(t, map, ExecBackend::Simulate, 0);
    CHECK(series.points.size() == 5);  // 4 sources + the final state
}

TEST_CASE("empty trajectory yields an empty series") {
    // A graph whose initial state is terminal produces no steps at all.
    WorkflowGraph g;
    g.state_count = 1;
    g.action_space_size = 1;
    g.initial_state = 0;
    g.terminals.emplace(0, TerminalLabel::Benign);
    g.validate();
    Trajectory t = build_trajectory(g, Policy{{0}}, 0, 10);
    CHECK(t.steps.empty());
    CommandMap map = parse_map(R"({"scenario": "x", "commands": [
      {"state": 0, "cmds": ["echo never"]}]})", 1);
    CHECK(execute_trajectory(t, map, ExecBackend::Simulate, 0).points.empty());
}

TEST_CASE("shell backend records exit codes without aborting") {
    WorkflowGraph g = make_chain_graph(2, 1);
    Trajectory t = build_trajectory(g, Policy{{0, 0}}, 0, 10);
    std::string map_text = R"({"scenario": "shell", "commands": [
      {"state": 0, "cmds": ["true", "exit 7"]},
      {"state": 1, "cmds": ["/nonexistent-malq-binary"]}]})";
    CommandMap map = parse_map(map_text, 2);
    TimingSeries series = execute_trajectory(t, map, ExecBackend::Shell, 0);
    REQUIRE(series.points.size() == 3);
    CHECK(series.points[0].exit_code == 0);
    CHECK(series.points[1].exit_code == 7);
    CHECK(series.points[2].exit_code == 127);  // shell: command not found
    for (const TimingPoint& p : series.points) CHECK(p.duration_s >= 0.0);
}

TEST_CASE("build_trajectory argument checks") {
    WorkflowGraph g = make_chain_graph(3, 2);
    CHECK_THROWS_AS(build_trajectory(g, Policy{{0}}, 0, 10), std::invalid_argument);
    CHECK_THROWS_AS(build_trajectory(g, Policy{{0, 0, 0}}, 0, 0), std::invalid_argument);
}
