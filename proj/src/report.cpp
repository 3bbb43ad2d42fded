#include "malq/report.hpp"

#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace malq {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

ReportKind report_kind_from_string(const std::string& text) {
    if (text == "convergence") return ReportKind::ConvergenceSpeed;
    if (text == "accuracy") return ReportKind::AccuracyVsLr;
    if (text == "timings") return ReportKind::CommandTimings;
    throw std::invalid_argument("unknown report kind \"" + text +
                                "\" (expected convergence|accuracy|timings)");
}

ReportFormat report_format_from_string(const std::string& text) {
    if (text == "csv") return ReportFormat::Csv;
    if (text == "json") return ReportFormat::Json;
    throw std::invalid_argument("unknown format \"" + text + "\" (expected csv|json)");
}

std::string fmt_double(double value) {
    return json(value).dump();
}

std::string fmt_accuracy(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.5f", value);
    return buf;
}

std::string csv_field(const std::string& text) {
    if (text.find_first_of(",\"\n\r") == std::string::npos) return text;
    std::string quoted = "\"";
    for (char c : text) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

SweepSummary summarize(const SweepResult& result) {
    SweepSummary summary;
    summary.rows.reserve(result.cells.size());
    for (const auto& [key, cell] : result.cells) {
        summary.rows.push_back({key.env_name, key.learning_rate, key.seed,
                                cell.episodes_to_convergence, cell.converged,
                                cell.policy_accuracy});
    }
    return summary;
}

std::string sweep_summary_csv(const SweepSummary& summary) {
    std::string out = "env,lr,seed,episodes_to_convergence,converged,accuracy\n";
    for (const SweepSummaryRow& row : summary.rows) {
        out += row.env + ',' + fmt_double(row.lr) + ',' + std::to_string(row.seed) + ',' +
               std::to_string(row.episodes_to_convergence) + ',' +
               (row.converged ? "true" : "false") + ',' + fmt_accuracy(row.accuracy) + '\n';
    }
    return out;
}

std::string sweep_summary_json(const SweepSummary& summary) {
    ordered_json cells = ordered_json::array();
    for (const SweepSummaryRow& row : summary.rows) {
        ordered_json cell;
        cell["env"] = row.env;
        cell["lr"] = row.lr;
        cell["seed"] = row.seed;
        cell["episodes_to_convergence"] = row.episodes_to_convergence;
        cell["converged"] = row.converged;
        cell["accuracy"] = row.accuracy;
        cells.push_back(std::move(cell));
    }
    ordered_json doc;
    doc["cells"] = std::move(cells);
    return doc.dump(2) + "\n";
}

namespace {

SweepSummary sweep_summary_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("sweep summary is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("cells") || !doc.at("cells").is_array()) {
        throw ParseError("sweep summary JSON needs a \"cells\" array");
    }
    SweepSummary summary;
    for (const json& cell : doc.at("cells")) {
        SweepSummaryRow row;
        row.env = cell.at("env").get<std::string>();
        row.lr = cell.at("lr").get<double>();
        row.seed = cell.at("seed").get<std::uint64_t>();
        row.episodes_to_convergence = cell.at("episodes_to_convergence").get<int>();
        row.converged = cell.at("converged").get<bool>();
        row.accuracy = cell.at("accuracy").get<double>();
        summary.rows.push_back(std::move(row));
    }
    return summary;
}

SweepSummary sweep_summary_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty sweep summary");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "env,lr,seed,episodes_to_convergence,converged,accuracy") {
        throw ParseError("unexpected sweep summary CSV header");
    }
    SweepSummary summary;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string env, lr, seed, episodes, converged, accuracy;
        if (!std::getline(fields, env, ',') || !std::getline(fields, lr, ',') ||
            !std::getline(fields, seed, ',') || !std::getline(fields, episodes, ',') ||
            !std::getline(fields, converged, ',') || !std::getline(fields, accuracy)) {
            throw ParseError("malformed sweep summary row at line " + std::to_string(line_no));
        }
        if (converged != "true" && converged != "false") {
            throw ParseError("converged must be true/false at line " + std::to_string(line_no));
        }
        SweepSummaryRow row;
        try {
            row.env = env;
            row.lr = std::stod(lr);
            row.seed = std::stoull(seed);
            row.episodes_to_convergence = std::stoi(episodes);
            row.converged = converged == "true";
            row.accuracy = std::stod(accuracy);
        } catch (const std::exception&) {
            throw ParseError("malformed sweep summary row at line " + std::to_string(line_no));
        }
        summary.rows.push_back(std::move(row));
    }
    return summary;
}

}  // namespace

SweepSummary load_sweep_summary(const std::string& text) {
    std::size_t start = text.find_first_not_of(" \t\r\n");
    if (start != std::string::npos && text[start] == '{') return sweep_summary_from_json(text);
    return sweep_summary_from_csv(text);
}

namespace {

// env -> lr -> samples, envs and lrs in ascending order.
std::map<std::string, std::map<double, std::vector<double>>> bucket(
    const SweepSummary& summary, bool accuracy) {
    std::map<std::string, std::map<double, std::vector<double>>> buckets;
    for (const SweepSummaryRow& row : summary.rows) {
        buckets[row.env][row.lr].push_back(
            accuracy ? row.accuracy : static_cast<double>(row.episodes_to_convergence));
    }
    return buckets;
}

}  // namespace

std::string emit_report(const SweepSummary& summary, ReportKind kind, ReportFormat format) {
    if (kind == ReportKind::CommandTimings) {
        throw std::invalid_argument("a timings report needs timing series, not a sweep");
    }
    const bool accuracy = kind == ReportKind::AccuracyVsLr;
    auto buckets = bucket(summary, accuracy);

    if (format == ReportFormat::Csv) {
        std::string out = accuracy ? "env,lr,median_accuracy\n" : "env,lr,median_episodes\n";
        for (const auto& [env, by_lr] : buckets) {
            for (const auto& [lr, samples] : by_lr) {
                double m = median(samples);
                out += env + ',' + fmt_double(lr) + ',' +
                       (accuracy ? fmt_accuracy(m) : fmt_double(m)) + '\n';
            }
        }
        return out;
    }

    ordered_json rows = ordered_json::array();
    for (const auto& [env, by_lr] : buckets) {
        for (const auto& [lr, samples] : by_lr) {
            ordered_json row;
            row["env"] = env;
            row["lr"] = lr;
            row[accuracy ? "median_accuracy" : "median_episodes"] = median(samples);
            rows.push_back(std::move(row));
        }
    }
    ordered_json doc;
    doc["kind"] = accuracy ? "accuracy_vs_lr" : "convergence_speed";
    doc["rows"] = std::move(rows);
    return doc.dump(2) + "\n";
}

std::string emit_report(const std::vector<TimingSeries>& series, ReportFormat format) {
    if (format == ReportFormat::Csv) {
        std::string out = "scenario,seq,state,command,duration_s,exit_status\n";
        for (const TimingSeries& s : series) {
            int seq = 0;
            for (const TimingPoint& p : s.points) {
                out += csv_field(s.scenario_label) + ',' + std::to_string(seq++) + ',' +
                       std::to_string(p.state) + ',' + csv_field(p.command) + ',' +
                       fmt_double(p.duration_s) + ',' +
                       (p.exit_code ? std::to_string(*p.exit_code) : "simulated") + '\n';
            }
        }
        return out;
    }

    ordered_json scenarios = ordered_json::array();
    for (const TimingSeries& s : series) {
        ordered_json points = ordered_json::array();
        int seq = 0;
        for (const TimingPoint& p : s.points) {
            ordered_json point;
            point["seq"] = seq++;
            point["state"] = p.state;
            point["command"] = p.command;
            point["duration_s"] = p.duration_s;
            if (p.exit_code) {
                point["exit_status"] = *p.exit_code;
            } else {
                point["exit_status"] = "simulated";
            }
            points.push_back(std::move(point));
        }
        ordered_json scenario;
        scenario["scenario"] = s.scenario_label;
        scenario["points"] = std::move(points);
        scenarios.push_back(std::move(scenario));
    }
    ordered_json doc;
    doc["kind"] = "command_timings";
    doc["scenarios"] = std::move(scenarios);
    return doc.dump(2) + "\n";
}

std::vector<TimingSeries> load_timing_series_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("timing series is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("scenarios") || !doc.at("scenarios").is_array()) {
        throw ParseError("timing series JSON needs a \"scenarios\" array");
    }
    std::vector<TimingSeries> out;
    for (const json& scenario : doc.at("scenarios")) {
        TimingSeries series;
        series.scenario_label = scenario.at("scenario").get<std::string>();
        for (const json& point : scenario.at("points")) {
            TimingPoint p;
            p.command = point.at("command").get<std::string>();
            p.state = point.at("state").get<int>();
            p.duration_s = point.at("duration_s").get<double>();
            const json& status = point.at("exit_status");
            if (status.is_string()) {
                if (status.get<std::string>() != "simulated") {
                    throw ParseError("exit_status must be an integer or \"simulated\"");
                }
            } else {
                p.exit_code = status.get<int>();
            }
            series.points.push_back(std::move(p));
        }
        out.push_back(std::move(series));
    }
    return out;
}

}  // namespace malq
