#include "malq/cli.hpp"

#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "malq/env.hpp"
#include "malq/graph.hpp"
#include "malq/manifest.hpp"
#include "malq/qlearn.hpp"
#include "malq/report.hpp"
#include "malq/sweep.hpp"
#include "malq/trace.hpp"

namespace malq {

namespace {

using nlohmann::ordered_json;

std::string join_args(const std::vector<std::string>& args) {
    std::string out = "malq";
    for (const std::string& a : args) {
        out += ' ';
        out += a;
    }
    return out;
}

// "0..9" (inclusive) or a comma-separated list.
std::vector<std::uint64_t> parse_seed_spec(const std::string& spec) {
    std::vector<std::uint64_t> seeds;
    auto range = spec.find("..");
    try {
        if (range != std::string::npos) {
            std::uint64_t lo = std::stoull(spec.substr(0, range));
            std::uint64_t hi = std::stoull(spec.substr(range + 2));
            if (hi < lo) throw std::invalid_argument("seed range is reversed: " + spec);
            for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
            return seeds;
        }
        std::istringstream in(spec);
        std::string token;
        while (std::getline(in, token, ',')) {
            if (!token.empty()) seeds.push_back(std::stoull(token));
        }
    } catch (const std::invalid_argument&) {
        throw std::invalid_argument("cannot parse seed list \"" + spec + "\"");
    }
    if (seeds.empty()) throw std::invalid_argument("seed list \"" + spec + "\" is empty");
    return seeds;
}

ConvergenceMode convergence_mode_from_string(const std::string& text) {
    if (text == "per-update") return ConvergenceMode::PerUpdate;
    if (text == "episode-max-delta") return ConvergenceMode::EpisodeMaxDelta;
    throw std::invalid_argument("unknown convergence mode \"" + text +
                                "\" (expected per-update|episode-max-delta)");
}

ordered_json train_config_json(const TrainConfig& config) {
    ordered_json j;
    j["alpha"] = config.alpha;
    j["gamma"] = config.gamma;
    j["epsilon_start"] = config.epsilon_start;
    j["epsilon_min"] = config.epsilon_min;
    j["epsilon_decay_value"] = config.effective_epsilon_decay();
    j["episodes"] = config.episodes;
    j["max_steps_per_episode"] = config.max_steps_per_episode;
    j["convergence_threshold"] = config.convergence_threshold;
    j["convergence_mode"] = config.convergence_mode == ConvergenceMode::PerUpdate
                                ? "per-update"
                                : "episode-max-delta";
    j["decay_epsilon_per_step"] = config.decay_epsilon_per_step;
    j["seed"] = config.seed;
    return j;
}

void write_with_manifest(const std::string& out_path, const std::string& content,
                         RunManifest manifest) {
    atomic_write_file(out_path, content);
    manifest.output_paths.push_back(out_path);
    atomic_write_file(manifest_path_for(out_path), manifest_to_json(manifest));
}

struct TrainOptions {
    std::string graph_path;
    std::string env = "base";
    double lr = 0.0;
    double gamma = 0.9;
    double epsilon_start = 0.9;
    double epsilon_min = 0.01;
    double epsilon_decay = -1.0;  // negative: derive from the episode count
    int episodes = 10000;
    int max_steps = 500;
    double threshold = 1e-4;
    std::string convergence = "episode-max-delta";
    bool decay_per_step = false;
    std::uint64_t seed = 0;
    std::string out;
    std::string format = "csv";

    TrainConfig to_config() const {
        TrainConfig config;
        config.alpha = lr;
        config.gamma = gamma;
        config.epsilon_start = epsilon_start;
        config.epsilon_min = epsilon_min;
        if (epsilon_decay >= 0.0) config.epsilon_decay_value = epsilon_decay;
        config.episodes = episodes;
        config.max_steps_per_episode = max_steps;
        config.convergence_threshold = threshold;
        config.convergence_mode = convergence_mode_from_string(convergence);
        config.decay_epsilon_per_step = decay_per_step;
        config.seed = seed;
        return config;
    }
};

void add_schedule_options(CLI::App* cmd, TrainOptions& opt) {
    cmd->add_option("--gamma", opt.gamma, "Discount factor");
    cmd->add_option("--episodes", opt.episodes, "Episode budget");
    cmd->add_option("--epsilon-start", opt.epsilon_start, "Initial exploration probability");
    cmd->add_option("--epsilon-min", opt.epsilon_min, "Exploration floor");
    cmd->add_option("--epsilon-decay", opt.epsilon_decay,
                    "Per-episode decay value (default: (start-min)/episodes)");
    cmd->add_option("--max-steps", opt.max_steps, "Step cap per episode");
    cmd->add_option("--threshold", opt.threshold, "Convergence threshold");
    cmd->add_option("--convergence", opt.convergence,
                    "Convergence test: per-update|episode-max-delta");
    cmd->add_flag("--decay-per-step", opt.decay_per_step,
                  "Decay epsilon inside the step loop instead of per episode");
}

int run_graph_gen(std::uint64_t seed, const std::string& out,
                  const std::vector<std::string>& args) {
    WorkflowGraph graph = generate_default_graph(seed);
    RunManifest manifest;
    manifest.command = join_args(args);
    manifest.argv = args;
    manifest.graph_file = out;
    manifest.config_values = ordered_json{{"seed", seed}};
    manifest.seeds = {seed};
    write_with_manifest(out, serialize_graph(graph), std::move(manifest));
    GraphStats stats = graph_stats(graph);
    std::cout << "wrote " << out << " (" << graph.state_count << " states, "
              << stats.defined_pair_count << " state-action pairs)\n";
    return 0;
}

int run_graph_validate(const std::string& path) {
    WorkflowGraph graph = load_graph_file(path);
    GraphStats stats = graph_stats(graph);
    std::cout << "ok: " << graph.state_count << " states, " << stats.defined_pair_count
              << " state-action pairs, " << stats.terminal_count << " terminals\n";
    return 0;
}

int run_graph_stats(const std::string& path, const std::string& format) {
    if (format != "text" && format != "json") {
        throw std::invalid_argument("unknown format \"" + format + "\" (expected text|json)");
    }
    WorkflowGraph graph = load_graph_file(path);
    GraphStats stats = graph_stats(graph);
    int min_actions = graph.action_space_size;
    int max_actions = 0;
    for (const auto& [state, count] : stats.per_state_action_counts) {
        (void)state;
        min_actions = std::min(min_actions, count);
        max_actions = std::max(max_actions, count);
    }
    if (format == "json") {
        ordered_json j;
        j["state_count"] = graph.state_count;
        j["action_space_size"] = graph.action_space_size;
        j["initial_state"] = graph.initial_state;
        j["defined_pair_count"] = stats.defined_pair_count;
        j["terminal_count"] = stats.terminal_count;
        j["min_actions_per_state"] = min_actions;
        j["max_actions_per_state"] = max_actions;
        ordered_json per_state = ordered_json::object();
        for (const auto& [state, count] : stats.per_state_action_counts) {
            per_state[std::to_string(state)] = count;
        }
        j["per_state_action_counts"] = std::move(per_state);
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "state_count: " << graph.state_count << "\n"
                  << "action_space_size: " << graph.action_space_size << "\n"
                  << "initial_state: " << graph.initial_state << "\n"
                  << "defined_pair_count: " << stats.defined_pair_count << "\n"
                  << "terminal_count: " << stats.terminal_count << "\n"
                  << "actions_per_state: " << min_actions << ".." << max_actions << "\n";
    }
    return 0;
}

int run_train(const TrainOptions& opt, const std::vector<std::string>& args) {
    WorkflowGraph graph = load_graph_file(opt.graph_path);
    TrainConfig config = opt.to_config();
    Env env = make_env(graph, variant_from_name(opt.env), opt.seed);
    TrainResult result = train(env, config);

    std::string content;
    if (report_format_from_string(opt.format) == ReportFormat::Json) {
        content = qtable_to_json(result.q_table);
    } else {
        std::ostringstream out;
        save_qtable_csv(result.q_table, out);
        content = out.str();
    }

    RunManifest manifest;
    manifest.command = join_args(args);
    manifest.argv = args;
    manifest.graph_file = opt.graph_path;
    manifest.config_values = train_config_json(config);
    manifest.config_values["env"] = env_name(variant_from_name(opt.env));
    manifest.seeds = {opt.seed};
    write_with_manifest(opt.out, content, std::move(manifest));

    std::cout << "episodes run: " << result.reward_list.size() << "\n";
    if (result.converged_at) {
        std::cout << "converged at episode " << *result.converged_at << "\n";
    } else {
        std::cout << "did not converge within the episode budget\n";
    }
    return 0;
}

struct SweepOptions {
    std::string graph_path;
    std::string envs = "env_new1,env_new2,env_new3";
    std::string lrs;
    std::string seeds = "0";
    TrainOptions base;
    int jobs = 1;
    std::string out;
    std::string format = "csv";
};

int run_sweep_cmd(const SweepOptions& opt, const std::vector<std::string>& args) {
    WorkflowGraph graph = load_graph_file(opt.graph_path);

    SweepConfig config;
    config.base = opt.base.to_config();
    config.base.alpha = 0.5;  // placeholder; run_sweep sets the cell rate
    config.seeds = parse_seed_spec(opt.seeds);
    config.keep_train_logs = false;
    if (!opt.envs.empty()) {
        config.env_names.clear();
        std::istringstream in(opt.envs);
        std::string token;
        while (std::getline(in, token, ',')) {
            if (!token.empty()) config.env_names.push_back(env_name(variant_from_name(token)));
        }
    }
    if (!opt.lrs.empty()) {
        config.learning_rates.clear();
        std::istringstream in(opt.lrs);
        std::string token;
        while (std::getline(in, token, ',')) {
            if (!token.empty()) config.learning_rates.push_back(std::stod(token));
        }
    }

    SweepResult result = run_sweep(graph, config, opt.jobs);
    SweepSummary summary = summarize(result);
    std::string content = report_format_from_string(opt.format) == ReportFormat::Json
                              ? sweep_summary_json(summary)
                              : sweep_summary_csv(summary);

    RunManifest manifest;
    manifest.command = join_args(args);
    manifest.argv = args;
    manifest.graph_file = opt.graph_path;
    manifest.config_values = train_config_json(config.base);
    manifest.config_values.erase("alpha");
    manifest.config_values.erase("seed");
    manifest.config_values["env_names"] = config.env_names;
    manifest.config_values["learning_rates"] = config.learning_rates;
    manifest.config_values["jobs"] = opt.jobs;
    manifest.seeds = config.seeds;
    write_with_manifest(opt.out, content, std::move(manifest));

    std::cout << "wrote " << opt.out << " (" << summary.rows.size() << " cells)\n";
    return 0;
}

struct EvalOptions {
    std::string qtable_path;
    std::string graph_path;
    std::string env = "reward";
    double gamma = 0.9;
    double tolerance = 1e-9;
    std::string ideal_path;
};

int run_eval(const EvalOptions& opt) {
    WorkflowGraph graph = load_graph_file(opt.graph_path);
    QTable q;
    std::string text = read_file(opt.qtable_path);
    std::size_t start = text.find_first_not_of(" \t\r\n");
    if (start != std::string::npos && text[start] == '{') {
        q = qtable_from_json(text);
    } else {
        std::istringstream in(text);
        q = load_qtable_csv(in);
    }
    if (q.state_count() != graph.state_count || q.action_count() != graph.action_space_size) {
        throw ValidationError("Q-table dimensions " + std::to_string(q.state_count()) + "x" +
                              std::to_string(q.action_count()) + " do not match the graph");
    }

    IdealPolicy ideal;
    if (!opt.ideal_path.empty()) {
        ideal = load_ideal_policy(read_file(opt.ideal_path));
    } else {
        VariantKind kind = variant_from_name(opt.env);
        ideal = value_iteration(graph, EnvVariant::defaults(kind), opt.gamma, opt.tolerance)
                    .second;
    }
    double accuracy = get_acc(ideal, extract_policy(q));
    std::cout << fmt_accuracy(accuracy) << "\n";
    return 0;
}

struct TraceOptions {
    std::string graph_path;
    std::string qtable_path;
    bool oracle = false;
    std::string env = "reward";
    double gamma = 0.9;
    std::vector<std::string> map_paths;
    std::string backend = "simulate";
    bool allow_shell = false;
    std::uint64_t seed = 0;
    int step_cap = 500;
    std::string out;
    std::string format = "csv";
};

int run_trace(const TraceOptions& opt, const std::vector<std::string>& args) {
    WorkflowGraph graph = load_graph_file(opt.graph_path);

    Policy policy;
    if (opt.oracle) {
        IdealPolicy ideal =
            value_iteration(graph, EnvVariant::defaults(variant_from_name(opt.env)), opt.gamma,
                            1e-9)
                .second;
        policy.actions = ideal.actions;
    } else {
        if (opt.qtable_path.empty()) {
            throw std::invalid_argument("trace needs --qtable or --oracle");
        }
        std::string text = read_file(opt.qtable_path);
        std::istringstream in(text);
        QTable q = load_qtable_csv(in);
        if (q.state_count() != graph.state_count) {
            throw ValidationError("Q-table does not match the graph's state count");
        }
        policy = extract_policy(q);
    }

    ExecBackend backend;
    if (opt.backend == "simulate") {
        backend = ExecBackend::Simulate;
    } else if (opt.backend == "shell") {
        if (!opt.allow_shell) {
            throw std::invalid_argument(
                "the shell backend runs mapped commands on this machine; pass --allow-shell "
                "to opt in");
        }
        backend = ExecBackend::Shell;
    } else {
        throw std::invalid_argument("unknown backend \"" + opt.backend +
                                    "\" (expected simulate|shell)");
    }

    Trajectory trajectory = build_trajectory(graph, policy, opt.seed, opt.step_cap);
    std::vector<TimingSeries> series;
    for (const std::string& map_path : opt.map_paths) {
        CommandMap map = load_command_map_file(map_path, graph.state_count);
        series.push_back(execute_trajectory(trajectory, map, backend, opt.seed));
    }
    std::string content = emit_report(series, report_format_from_string(opt.format));

    RunManifest manifest;
    manifest.command = join_args(args);
    manifest.argv = args;
    manifest.graph_file = opt.graph_path;
    manifest.config_values =
        ordered_json{{"policy", opt.oracle ? "oracle" : opt.qtable_path},
                     {"env", opt.oracle ? env_name(variant_from_name(opt.env)) : ""},
                     {"gamma", opt.gamma},
                     {"maps", opt.map_paths},
                     {"backend", opt.backend},
                     {"step_cap", opt.step_cap},
                     {"seed", opt.seed}};
    manifest.seeds = {opt.seed};
    write_with_manifest(opt.out, content, std::move(manifest));

    std::cout << "trajectory: " << trajectory.steps.size() << " steps, ended "
              << trajectory.terminal_label << "\n";
    return 0;
}

struct ReportOptions {
    std::string kind;
    std::vector<std::string> inputs;
    std::string out;
    std::string format = "csv";
};

int run_report(const ReportOptions& opt, const std::vector<std::string>& args) {
    ReportKind kind = report_kind_from_string(opt.kind);
    ReportFormat format = report_format_from_string(opt.format);

    std::string content;
    if (kind == ReportKind::CommandTimings) {
        std::vector<TimingSeries> series;
        for (const std::string& path : opt.inputs) {
            for (TimingSeries& s : load_timing_series_json(read_file(path))) {
                series.push_back(std::move(s));
            }
        }
        content = emit_report(series, format);
    } else {
        if (opt.inputs.size() != 1) {
            throw std::invalid_argument("sweep-based reports take exactly one --in file");
        }
        SweepSummary summary = load_sweep_summary(read_file(opt.inputs.front()));
        content = emit_report(summary, kind, format);
    }

    RunManifest manifest;
    manifest.command = join_args(args);
    manifest.argv = args;
    manifest.config_values =
        ordered_json{{"kind", opt.kind}, {"format", opt.format}, {"inputs", opt.inputs}};
    write_with_manifest(opt.out, content, std::move(manifest));
    std::cout << "wrote " << opt.out << "\n";
    return 0;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args) {
    CLI::App app{"Tabular Q-learning over malware-investigation workflow MDPs"};
    app.require_subcommand(1);

    std::function<int()> action;

    // graph gen | validate | stats
    CLI::App* graph_cmd = app.add_subcommand("graph", "Workflow graph utilities");
    graph_cmd->require_subcommand(1);
    {
        auto seed = std::make_shared<std::uint64_t>(0);
        auto out = std::make_shared<std::string>();
        CLI::App* gen = graph_cmd->add_subcommand("gen", "Generate the canonical default graph");
        gen->add_option("--seed", *seed, "Generator seed")->envname("MALQ_SEED");
        gen->add_option("--out", *out, "Output graph file")->required();
        gen->callback([&action, seed, out, &args] {
            action = [seed, out, &args] { return run_graph_gen(*seed, *out, args); };
        });

        auto vpath = std::make_shared<std::string>();
        CLI::App* validate = graph_cmd->add_subcommand("validate", "Check a graph file");
        validate->add_option("--graph", *vpath, "Graph file")->required();
        validate->callback([&action, vpath] {
            action = [vpath] { return run_graph_validate(*vpath); };
        });

        auto spath = std::make_shared<std::string>();
        auto sformat = std::make_shared<std::string>("text");
        CLI::App* stats = graph_cmd->add_subcommand("stats", "Print graph statistics");
        stats->add_option("--graph", *spath, "Graph file")->required();
        stats->add_option("--format", *sformat, "text|json");
        stats->callback([&action, spath, sformat] {
            action = [spath, sformat] { return run_graph_stats(*spath, *sformat); };
        });
    }

    // train
    auto train_opt = std::make_shared<TrainOptions>();
    {
        CLI::App* cmd = app.add_subcommand("train", "Train one agent and save its Q-table");
        cmd->add_option("--graph", train_opt->graph_path, "Graph file")->required();
        cmd->add_option("--env", train_opt->env, "Environment: base|reward|time or env_new1..3");
        cmd->add_option("--lr", train_opt->lr, "Learning rate (alpha)")->required();
        add_schedule_options(cmd, *train_opt);
        cmd->add_option("--seed", train_opt->seed, "Training seed")->envname("MALQ_SEED");
        cmd->add_option("--out", train_opt->out, "Output Q-table file")->required();
        cmd->add_option("--format", train_opt->format, "csv|json");
        cmd->callback([&action, train_opt, &args] {
            action = [train_opt, &args] { return run_train(*train_opt, args); };
        });
    }

    // sweep
    auto sweep_opt = std::make_shared<SweepOptions>();
    {
        CLI::App* cmd = app.add_subcommand("sweep", "Learning-rate sweep over the environments");
        cmd->add_option("--graph", sweep_opt->graph_path, "Graph file")->required();
        cmd->add_option("--envs", sweep_opt->envs, "Comma-separated environment names");
        cmd->add_option("--lrs", sweep_opt->lrs, "Comma-separated learning rates");
        cmd->add_option("--seeds", sweep_opt->seeds, "Seed list: 0..9 or 0,3,7")
            ->envname("MALQ_SEED");
        add_schedule_options(cmd, sweep_opt->base);
        cmd->add_option("--jobs", sweep_opt->jobs, "Worker threads (results are unaffected)");
        cmd->add_option("--out", sweep_opt->out, "Output report file")->required();
        cmd->add_option("--format", sweep_opt->format, "csv|json");
        cmd->callback([&action, sweep_opt, &args] {
            action = [sweep_opt, &args] { return run_sweep_cmd(*sweep_opt, args); };
        });
    }

    // eval
    auto eval_opt = std::make_shared<EvalOptions>();
    {
        CLI::App* cmd = app.add_subcommand("eval", "Score a Q-table against the ideal policy");
        cmd->add_option("--qtable", eval_opt->qtable_path, "Q-table file (csv or json)")
            ->required();
        cmd->add_option("--graph", eval_opt->graph_path, "Graph file")->required();
        cmd->add_option("--env", eval_opt->env, "Environment for the value-iteration oracle");
        cmd->add_option("--gamma", eval_opt->gamma, "Discount factor of the oracle");
        cmd->add_option("--tolerance", eval_opt->tolerance, "Oracle tolerance");
        cmd->add_option("--ideal", eval_opt->ideal_path,
                        "Hand-authored ideal policy file (overrides the oracle)");
        cmd->callback([&action, eval_opt] {
            action = [eval_opt] { return run_eval(*eval_opt); };
        });
    }

    // trace
    auto trace_opt = std::make_shared<TraceOptions>();
    {
        CLI::App* cmd =
            app.add_subcommand("trace", "Run mapped commands along a greedy trajectory");
        cmd->add_option("--graph", trace_opt->graph_path, "Graph file")->required();
        cmd->add_option("--qtable", trace_opt->qtable_path, "Q-table providing the policy");
        cmd->add_flag("--oracle", trace_opt->oracle, "Use the value-iteration policy instead");
        cmd->add_option("--env", trace_opt->env, "Environment for --oracle");
        cmd->add_option("--gamma", trace_opt->gamma, "Discount factor for --oracle");
        cmd->add_option("--map", trace_opt->map_paths, "Command map file (repeatable)")
            ->required();
        cmd->add_option("--backend", trace_opt->backend, "simulate|shell");
        cmd->add_flag("--allow-shell", trace_opt->allow_shell,
                      "Opt in to executing mapped commands");
        cmd->add_option("--seed", trace_opt->seed, "Sampling seed")->envname("MALQ_SEED");
        cmd->add_option("--step-cap", trace_opt->step_cap, "Trajectory step cap");
        cmd->add_option("--out", trace_opt->out, "Output timing report")->required();
        cmd->add_option("--format", trace_opt->format, "csv|json");
        cmd->callback([&action, trace_opt, &args] {
            action = [trace_opt, &args] { return run_trace(*trace_opt, args); };
        });
    }

    // report
    auto report_opt = std::make_shared<ReportOptions>();
    {
        CLI::App* cmd = app.add_subcommand("report", "Emit figure-ready datasets");
        cmd->add_option("--kind", report_opt->kind, "convergence|accuracy|timings")->required();
        cmd->add_option("--in", report_opt->inputs, "Input file(s)")->required();
        cmd->add_option("--out", report_opt->out, "Output file")->required();
        cmd->add_option("--format", report_opt->format, "csv|json");
        cmd->callback([&action, report_opt, &args] {
            action = [report_opt, &args] { return run_report(*report_opt, args); };
        });
    }

    // replay
    auto manifest_path = std::make_shared<std::string>();
    {
        CLI::App* cmd = app.add_subcommand("replay", "Re-run a recorded manifest");
        cmd->add_option("--manifest", *manifest_path, "Manifest file")->required();
        cmd->callback([&action, manifest_path] {
            action = [manifest_path] {
                RunManifest manifest = manifest_from_json(read_file(*manifest_path));
                return cli_dispatch(manifest.argv);
            };
        });
    }

    std::vector<const char*> argv;
    argv.push_back("malq");
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the usage message
        return 1;
    }

    try {
        return action ? action() : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace malq
