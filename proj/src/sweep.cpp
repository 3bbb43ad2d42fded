#include "malq/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace malq {

IdealPolicy load_ideal_policy(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("ideal policy is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("actions") || !doc.at("actions").is_array()) {
        throw ParseError("ideal policy needs an \"actions\" array");
    }
    IdealPolicy policy;
    for (const auto& a : doc.at("actions")) {
        if (!a.is_number_integer()) throw ParseError("ideal policy actions must be integers");
        int action = a.get<int>();
        if (action < IdealPolicy::kNoAction) {
            throw ValidationError("ideal policy action " + std::to_string(action) +
                                  " below the -1 sentinel");
        }
        policy.actions.push_back(action);
    }
    return policy;
}

void SweepConfig::validate() const {
    if (env_names.empty()) throw std::invalid_argument("sweep needs at least one environment");
    for (const std::string& name : env_names) variant_from_name(name);
    if (learning_rates.empty()) throw std::invalid_argument("sweep needs learning rates");
    for (std::size_t i = 0; i < learning_rates.size(); ++i) {
        double lr = learning_rates[i];
        if (!(lr > 0.0) || lr > 1.0) {
            throw std::invalid_argument("learning rates must be in (0,1]");
        }
        if (i > 0 && !(learning_rates[i - 1] < lr)) {
            throw std::invalid_argument("learning rates must be strictly increasing");
        }
    }
    if (seeds.empty()) throw std::invalid_argument("sweep needs at least one seed");
    if (!(oracle_tolerance > 0.0)) throw std::invalid_argument("oracle tolerance must be positive");
    base.validate();
}

std::pair<std::vector<double>, IdealPolicy> value_iteration(
    const WorkflowGraph& graph, const EnvVariant& variant, double gamma, double tolerance,
    const std::vector<double>* initial) {
    if (gamma < 0.0 || !(gamma < 1.0)) throw std::invalid_argument("gamma must be in [0,1)");
    if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
    if (initial && static_cast<int>(initial->size()) != graph.state_count) {
        throw std::invalid_argument("initial value vector does not match state_count");
    }

    std::vector<double> v = initial ? *initial : std::vector<double>(graph.state_count, 0.0);
    for (const auto& [t, label] : graph.terminals) {
        (void)label;
        v[t] = 0.0;
    }

    auto action_value = [&](int state, const std::vector<Outcome>& outcomes,
                            const std::vector<double>& values) {
        (void)state;
        double q = 0.0;
        for (const Outcome& o : outcomes) {
            double r = o.reward_override
                           ? *o.reward_override
                           : (o.done ? variant.terminal_reward : variant.step_penalty);
            q += o.probability * (r + gamma * values[o.next_state]);
        }
        return q;
    };

    std::vector<double> next = v;
    double change = std::numeric_limits<double>::infinity();
    while (change >= tolerance) {
        change = 0.0;
        for (const auto& [state, row] : graph.transitions) {
            double best = -std::numeric_limits<double>::infinity();
            for (const auto& [action, outcomes] : row) {
                (void)action;
                best = std::max(best, action_value(state, outcomes, v));
            }
            change = std::max(change, std::abs(best - v[state]));
            next[state] = best;
        }
        std::swap(v, next);
    }

    IdealPolicy policy;
    policy.actions.assign(graph.state_count, 0);
    for (const auto& [state, row] : graph.transitions) {
        double best = -std::numeric_limits<double>::infinity();
        int best_action = 0;
        bool first = true;
        for (const auto& [action, outcomes] : row) {
            double q = action_value(state, outcomes, v);
            if (first || q > best) {
                best = q;
                best_action = action;
                first = false;
            }
        }
        policy.actions[state] = best_action;
    }
    return {std::move(v), std::move(policy)};
}

double get_acc(const std::vector<int>& ideal, const std::vector<int>& predicted) {
    if (ideal.size() != predicted.size()) {
        throw std::invalid_argument("get_acc: list lengths differ (" +
                                    std::to_string(ideal.size()) + " vs " +
                                    std::to_string(predicted.size()) + ")");
    }
    long matches = 0;
    long total = 0;
    for (std::size_t i = 0; i < ideal.size(); ++i) {
        if (ideal[i] == IdealPolicy::kNoAction || predicted[i] == IdealPolicy::kNoAction) continue;
        ++total;
        if (ideal[i] == predicted[i]) ++matches;
    }
    if (total == 0) return 1.0;  // nothing to compare, no mismatch
    return std::floor(static_cast<double>(matches) / total * 100000.0 + 0.5) / 100000.0;
}

double get_acc(const IdealPolicy& ideal, const Policy& predicted) {
    return get_acc(ideal.actions, predicted.actions);
}

namespace {

double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

SweepResult run_sweep(const WorkflowGraph& graph, const SweepConfig& config, int jobs) {
    config.validate();

    struct CellPlan {
        CellKey key;
        VariantKind kind;
        const IdealPolicy* ideal;
    };

    // One oracle solve per environment; cells reuse it read-only.
    std::map<std::string, IdealPolicy> ideals;
    for (const std::string& name : config.env_names) {
        VariantKind kind = variant_from_name(name);
        auto [values, ideal] = value_iteration(graph, EnvVariant::defaults(kind),
                                               config.base.gamma, config.oracle_tolerance);
        (void)values;
        ideals.emplace(name, std::move(ideal));
    }

    std::vector<CellPlan> plans;
    for (const std::string& name : config.env_names) {
        for (double lr : config.learning_rates) {
            for (std::uint64_t seed : config.seeds) {
                plans.push_back({{name, lr, seed}, variant_from_name(name), &ideals.at(name)});
            }
        }
    }

    std::vector<SweepCell> cells(plans.size());
    std::vector<std::string> errors(plans.size());
    auto run_cell = [&](std::size_t i) {
        const CellPlan& plan = plans[i];
        try {
            TrainConfig cell_config = config.base;
            cell_config.alpha = plan.key.learning_rate;
            cell_config.seed = plan.key.seed;
            Env env = make_env(graph, plan.kind, plan.key.seed);
            TrainResult trained = train(env, cell_config);

            SweepCell& cell = cells[i];
            cell.converged = trained.converged_at.has_value();
            cell.episodes_to_convergence =
                cell.converged ? *trained.converged_at : cell_config.episodes;
            cell.policy_accuracy = get_acc(*plan.ideal, extract_policy(trained.q_table));
            if (config.keep_train_logs) {
                cell.train_result = std::move(trained);
            } else {
                cell.train_result.q_table = std::move(trained.q_table);
                cell.train_result.converged_at = trained.converged_at;
            }
        } catch (const std::exception& e) {
            errors[i] = "cell (env=" + plan.key.env_name +
                        ", lr=" + std::to_string(plan.key.learning_rate) +
                        ", seed=" + std::to_string(plan.key.seed) + "): " + e.what();
        }
    };

    int workers = std::max(1, jobs);
    if (workers == 1) {
        for (std::size_t i = 0; i < plans.size(); ++i) run_cell(i);
    } else {
        std::atomic<std::size_t> cursor{0};
        auto worker = [&] {
            for (std::size_t i = cursor.fetch_add(1); i < plans.size(); i = cursor.fetch_add(1)) {
                run_cell(i);
            }
        };
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    std::string failures;
    for (const std::string& e : errors) {
        if (!e.empty()) failures += (failures.empty() ? "" : "; ") + e;
    }
    if (!failures.empty()) throw std::runtime_error("sweep failed: " + failures);

    SweepResult result;
    for (std::size_t i = 0; i < plans.size(); ++i) {
        result.cells.emplace(plans[i].key, std::move(cells[i]));
    }
    return result;
}

namespace {

std::vector<std::pair<double, double>> curve(const SweepResult& result,
                                             const std::string& env_name, bool accuracy) {
    std::map<double, std::vector<double>> buckets;
    for (const auto& [key, cell] : result.cells) {
        if (key.env_name != env_name) continue;
        buckets[key.learning_rate].push_back(
            accuracy ? cell.policy_accuracy : static_cast<double>(cell.episodes_to_convergence));
    }
    if (buckets.empty()) {
        throw std::invalid_argument("no sweep cells for environment \"" + env_name + "\"");
    }
    std::vector<std::pair<double, double>> points;
    points.reserve(buckets.size());
    for (auto& [lr, values] : buckets) points.emplace_back(lr, median(std::move(values)));
    return points;
}

}  // namespace

std::vector<std::pair<double, double>> convergence_curve(const SweepResult& result,
                                                         const std::string& env_name) {
    return curve(result, env_name, false);
}

std::vector<std::pair<double, double>> accuracy_curve(const SweepResult& result,
                                                      const std::string& env_name) {
    return curve(result, env_name, true);
}

}  // namespace malq
