#include <doctest.h>

#include <filesystem>

#include "malq/manifest.hpp"
#include "malq/report.hpp"
#include "test_helpers.hpp"

using namespace malq;

namespace {

SweepSummary synthetic_summary() {
    SweepSummary summary;
    for (std::string env : {"env_new1", "env_new2"}) {
        for (double lr : {0.1, 0.4}) {
            for (std::uint64_t seed : {0, 1, 2}) {
                SweepSummaryRow row;
                row.env = env;
                row.lr = lr;
                row.seed = seed;
                row.episodes_to_convergence = static_cast<int>(100 + 10 * seed);
                row.converged = seed != 2;
                row.accuracy = 0.9 + 0.01 * static_cast<double>(seed);
                summary.rows.push_back(row);
            }
        }
    }
    return summary;
}

}  // namespace

TEST_CASE("sweep summary round-trips through csv and json") {
    SweepSummary summary = synthetic_summary();
    CHECK(load_sweep_summary(sweep_summary_csv(summary)) == summary);
    CHECK(load_sweep_summary(sweep_summary_json(summary)) == summary);
    CHECK_THROWS_AS(load_sweep_summary("bogus,header\n"), ParseError);
}

TEST_CASE("convergence and accuracy reports take medians over seeds") {
    SweepSummary summary = synthetic_summary();

    std::string conv = emit_report(summary, ReportKind::ConvergenceSpeed, ReportFormat::Csv);
    CHECK(conv == "env,lr,median_episodes\n"
                  "env_new1,0.1,110.0\n"
                  "env_new1,0.4,110.0\n"
                  "env_new2,0.1,110.0\n"
                  "env_new2,0.4,110.0\n");

    std::string acc = emit_report(summary, ReportKind::AccuracyVsLr, ReportFormat::Csv);
    CHECK(acc == "env,lr,median_accuracy\n"
                 "env_new1,0.1,0.91000\n"
                 "env_new1,0.4,0.91000\n"
                 "env_new2,0.1,0.91000\n"
                 "env_new2,0.4,0.91000\n");

    // even seed counts average the middle two
    summary.rows.resize(11);  // env_new2/0.4 keeps seeds {0, 1}
    std::string conv_even = emit_report(summary, ReportKind::ConvergenceSpeed,
                                        ReportFormat::Csv);
    CHECK(conv_even.find("env_new2,0.4,105.0\n") != std::string::npos);

    CHECK_THROWS_AS(emit_report(summary, ReportKind::CommandTimings, ReportFormat::Csv),
                    std::invalid_argument);
}

TEST_CASE("report emission is byte-stable") {
    SweepSummary summary = synthetic_summary();
    for (ReportKind kind : {ReportKind::ConvergenceSpeed, ReportKind::AccuracyVsLr}) {
        for (ReportFormat format : {ReportFormat::Csv, ReportFormat::Json}) {
            CHECK(emit_report(summary, kind, format) == emit_report(summary, kind, format));
        }
    }
}

TEST_CASE("timing reports group by scenario and quote awkward fields") {
    TimingSeries wannacry{"WannaCry", {{"echo pslist", 3, 0.25, std::nullopt}}};
    TimingSeries cerber{"Cerber", {{"reg query \"HKLM\\X\", fast", 10, 1.5, 7}}};
    TimingSeries cridex{"Cridex", {}};
    std::vector<TimingSeries> series{wannacry, cerber, cridex};

    std::string csv = emit_report(series, ReportFormat::Csv);
    CHECK(csv == "scenario,seq,state,command,duration_s,exit_status\n"
                 "WannaCry,0,3,echo pslist,0.25,simulated\n"
                 "Cerber,0,10,\"reg query \"\"HKLM\\X\"\", fast\",1.5,7\n");

    std::string json = emit_report(series, ReportFormat::Json);
    std::vector<TimingSeries> loaded = load_timing_series_json(json);
    REQUIRE(loaded.size() == 3);
    CHECK(loaded[0].scenario_label == "WannaCry");
    CHECK(loaded[1].points[0].exit_code == 7);
    CHECK(loaded[1].points[0].command == "reg query \"HKLM\\X\", fast");
    CHECK(loaded[2].points.empty());
    CHECK(emit_report(loaded, ReportFormat::Json) == json);
}

TEST_CASE("double formatting is shortest round-trip") {
    CHECK(fmt_double(0.4) == "0.4");
    CHECK(fmt_double(10000.0) == "10000.0");
    CHECK(fmt_accuracy(0.94030) == "0.94030");
    CHECK(fmt_accuracy(1.0) == "1.00000");
}

TEST_CASE("manifest round-trip and atomic writes") {
    RunManifest manifest;
    manifest.command = "malq graph gen --seed 0 --out g.json";
    manifest.argv = {"graph", "gen", "--seed", "0", "--out", "g.json"};
    manifest.graph_file = "g.json";
    manifest.config_values = {{"seed", 0}};
    manifest.seeds = {0};
    manifest.output_paths = {"g.json"};

    std::string encoded = manifest_to_json(manifest);
    RunManifest decoded = manifest_from_json(encoded);
    CHECK(decoded.command == manifest.command);
    CHECK(decoded.argv == manifest.argv);
    CHECK(decoded.seeds == manifest.seeds);
    CHECK(decoded.output_paths == manifest.output_paths);
    CHECK(manifest_to_json(decoded) == encoded);

    CHECK(manifest_path_for("out/sweep.csv") == "out/sweep.csv.manifest.json");
    CHECK_THROWS_AS(manifest_from_json("{}"), ParseError);

    auto path = std::filesystem::temp_directory_path() / "malq_manifest_test.json";
    atomic_write_file(path.string(), encoded);
    CHECK(read_file(path.string()) == encoded);
    CHECK_FALSE(std::filesystem::exists(path.string() + ".tmp"));
    std::filesystem::remove(path);
}
