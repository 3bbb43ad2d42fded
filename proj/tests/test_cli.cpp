#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "malq/cli.hpp"
#include "malq/manifest.hpp"
#include "malq/report.hpp"
#include "test_helpers.hpp"

using namespace malq;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("malq_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

// The CLI prints progress on stdout; keep test output clean and capturable.
struct CaptureStdout {
    std::ostringstream buffer;
    std::streambuf* saved;
    CaptureStdout() : saved(std::cout.rdbuf(buffer.rdbuf())) {}
    ~CaptureStdout() { std::cout.rdbuf(saved); }
    std::string text() const { return buffer.str(); }
};

int run(const std::vector<std::string>& args) {
    CaptureStdout capture;
    return cli_dispatch(args);
}

}  // namespace

TEST_CASE("usage errors exit 1") {
    CaptureStdout capture;
    CHECK(cli_dispatch({}) == 1);
    CHECK(cli_dispatch({"frobnicate"}) == 1);
    CHECK(cli_dispatch({"graph", "gen", "--bogus-flag"}) == 1);
    CHECK(cli_dispatch({"train"}) == 1);  // missing required options
    CHECK(cli_dispatch({"--help"}) == 0);
}

TEST_CASE("graph gen, validate and stats") {
    TempDir dir;
    std::string graph = dir.file("g.json");
    CHECK(run({"graph", "gen", "--seed", "0", "--out", graph}) == 0);
    CHECK(fs::exists(graph));
    CHECK(fs::exists(manifest_path_for(graph)));
    CHECK(run({"graph", "validate", "--graph", graph}) == 0);
    CHECK(run({"graph", "stats", "--graph", graph, "--format", "json"}) == 0);

    SUBCASE("invalid graph files exit 2") {
        std::string bad = dir.file("bad.json");
        std::ofstream(bad) << "{\"state_count\": 1}";
        CHECK(run({"graph", "validate", "--graph", bad}) == 2);
        CHECK(run({"graph", "validate", "--graph", dir.file("missing.json")}) == 2);
    }
}

TEST_CASE("train, eval and trace round through files") {
    TempDir dir;
    std::string graph = dir.file("g.json");
    REQUIRE(run({"graph", "gen", "--seed", "0", "--out", graph}) == 0);

    std::string qtable = dir.file("q.csv");
    CHECK(run({"train", "--graph", graph, "--env", "reward", "--lr", "0.4", "--episodes",
               "1500", "--seed", "3", "--out", qtable}) == 0);
    CHECK(fs::exists(qtable));
    CHECK(fs::exists(manifest_path_for(qtable)));

    {
        CaptureStdout capture;
        CHECK(cli_dispatch({"eval", "--qtable", qtable, "--graph", graph, "--env", "reward"}) ==
              0);
        std::string out = capture.text();
        // an accuracy with exactly five decimals
        REQUIRE(out.size() >= 8);
        CHECK(out[1] == '.');
        CHECK(out.find('\n') == 7);
    }

    std::string map = dir.file("map.json");
    std::ofstream(map) << R"({"scenario": "WannaCry", "commands": [
      {"state": 0, "cmds": ["echo clone"]}]})";
    std::string timings = dir.file("timings.csv");
    CHECK(run({"trace", "--graph", graph, "--qtable", qtable, "--map", map, "--seed", "1",
               "--out", timings}) == 0);
    std::string content = read_file(timings);
    CHECK(content.find("scenario,seq,state,command,duration_s,exit_status") == 0);
    CHECK(content.find("WannaCry") != std::string::npos);

    SUBCASE("shell backend needs the opt-in flag") {
        CHECK(run({"trace", "--graph", graph, "--qtable", qtable, "--map", map, "--backend",
                   "shell", "--seed", "1", "--out", dir.file("t2.csv")}) == 2);
    }
}

TEST_CASE("sweep and report pipeline") {
    TempDir dir;
    std::string graph = dir.file("g.json");
    REQUIRE(run({"graph", "gen", "--seed", "0", "--out", graph}) == 0);

    std::string sweep = dir.file("sweep.json");
    CHECK(run({"sweep", "--graph", graph, "--lrs", "0.4,0.8", "--seeds", "0..1", "--episodes",
               "300", "--out", sweep, "--format", "json"}) == 0);
    std::string body = read_file(sweep);
    CHECK(body.find("\"cells\"") != std::string::npos);

    std::string conv = dir.file("conv.csv");
    CHECK(run({"report", "--kind", "convergence", "--in", sweep, "--out", conv}) == 0);
    CHECK(read_file(conv).find("env,lr,median_episodes") == 0);
    std::string acc = dir.file("acc.csv");
    CHECK(run({"report", "--kind", "accuracy", "--in", sweep, "--out", acc}) == 0);
    CHECK(read_file(acc).find("env,lr,median_accuracy") == 0);

    // 3 envs x 2 lrs x 2 seeds
    std::istringstream rows(read_file(sweep));
    SweepSummary summary = load_sweep_summary(read_file(sweep));
    CHECK(summary.rows.size() == 12);
}

TEST_CASE("replay reproduces outputs byte for byte") {
    TempDir dir;
    std::string graph = dir.file("g.json");
    REQUIRE(run({"graph", "gen", "--seed", "5", "--out", graph}) == 0);
    std::string original = read_file(graph);
    std::string manifest = manifest_path_for(graph);
    std::string manifest_body = read_file(manifest);

    std::ofstream(graph) << "tampered";
    CHECK(run({"replay", "--manifest", manifest}) == 0);
    CHECK(read_file(graph) == original);
    CHECK(read_file(manifest) == manifest_body);
}

TEST_CASE("timings report merges scenario files") {
    TempDir dir;
    std::string graph = dir.file("g.json");
    REQUIRE(run({"graph", "gen", "--seed", "0", "--out", graph}) == 0);
    std::string qtable = dir.file("q.csv");
    REQUIRE(run({"train", "--graph", graph, "--env", "reward", "--lr", "0.4", "--episodes",
                 "800", "--seed", "3", "--out", qtable}) == 0);

    auto write_map = [&](const std::string& name, const std::string& scenario) {
        std::string path = dir.file(name);
        std::ofstream(path) << R"({"scenario": ")" << scenario << R"(", "commands": [
          {"state": 0, "cmds": ["echo acquire"]}]})";
        return path;
    };
    std::string m1 = write_map("w.json", "WannaCry");
    std::string m2 = write_map("c.json", "Cerber");
    std::string m3 = write_map("x.json", "Cridex");

    std::string series = dir.file("series.json");
    CHECK(run({"trace", "--graph", graph, "--qtable", qtable, "--map", m1, "--map", m2,
               "--map", m3, "--seed", "2", "--out", series, "--format", "json"}) == 0);

    std::string merged = dir.file("timings.csv");
    CHECK(run({"report", "--kind", "timings", "--in", series, "--out", merged}) == 0);
    std::string content = read_file(merged);
    CHECK(content.find("WannaCry") != std::string::npos);
    CHECK(content.find("Cerber") != std::string::npos);
    CHECK(content.find("Cridex") != std::string::npos);
}
