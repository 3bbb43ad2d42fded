#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "malq/sweep.hpp"
#include "malq/trace.hpp"

namespace malq {

enum class ReportKind { ConvergenceSpeed, AccuracyVsLr, CommandTimings };
enum class ReportFormat { Csv, Json };

ReportKind report_kind_from_string(const std::string& text);
ReportFormat report_format_from_string(const std::string& text);

// One sweep cell in its persistent form.
struct SweepSummaryRow {
    std::string env;
    double lr = 0.0;
    std::uint64_t seed = 0;
    int episodes_to_convergence = 0;
    bool converged = false;
    double accuracy = 0.0;

    friend bool operator==(const SweepSummaryRow&, const SweepSummaryRow&) = default;
};

struct SweepSummary {
    std::vector<SweepSummaryRow> rows;

    friend bool operator==(const SweepSummary&, const SweepSummary&) = default;
};

SweepSummary summarize(const SweepResult& result);

// `env,lr,seed,episodes_to_convergence,converged,accuracy` rows, and the
// equivalent JSON document. Both load back losslessly.
std::string sweep_summary_csv(const SweepSummary& summary);
std::string sweep_summary_json(const SweepSummary& summary);
// Accepts either form (sniffs JSON vs CSV).
SweepSummary load_sweep_summary(const std::string& text);

// Figure-data emission. ConvergenceSpeed: (env, lr, median_episodes);
// AccuracyVsLr: (env, lr, median_accuracy). Pure functions of their input.
std::string emit_report(const SweepSummary& summary, ReportKind kind, ReportFormat format);

// CommandTimings: per-point rows grouped by scenario.
std::string emit_report(const std::vector<TimingSeries>& series, ReportFormat format);

// Reads back the JSON emitted by the timings report (any scenario count).
std::vector<TimingSeries> load_timing_series_json(const std::string& text);

// Shortest round-trip decimal form of a double (what the JSON layer emits).
std::string fmt_double(double value);
// Exactly five decimals, the accuracy display contract.
std::string fmt_accuracy(double value);
// RFC 4180 style quoting when the field needs it.
std::string csv_field(const std::string& text);

}  // namespace malq
