#include "malq/qlearn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace malq {

double TrainConfig::effective_epsilon_decay() const {
    if (epsilon_decay_value) return *epsilon_decay_value;
    if (episodes == 0) return 0.0;
    return (epsilon_start - epsilon_min) / episodes;
}

void TrainConfig::validate() const {
    if (!(alpha > 0.0) || alpha > 1.0) throw std::invalid_argument("alpha must be in (0,1]");
    if (gamma < 0.0 || !(gamma < 1.0)) throw std::invalid_argument("gamma must be in [0,1)");
    if (epsilon_start < 0.0 || epsilon_start > 1.0) {
        throw std::invalid_argument("epsilon_start must be in [0,1]");
    }
    if (epsilon_min < 0.0) throw std::invalid_argument("epsilon_min must be >= 0");
    if (epsilon_min > epsilon_start) {
        throw std::invalid_argument("epsilon_min must not exceed epsilon_start");
    }
    if (epsilon_decay_value && *epsilon_decay_value < 0.0) {
        throw std::invalid_argument("epsilon_decay_value must be >= 0");
    }
    if (episodes < 0) throw std::invalid_argument("episodes must be >= 0");
    if (max_steps_per_episode <= 0) {
        throw std::invalid_argument("max_steps_per_episode must be positive");
    }
    if (!(convergence_threshold > 0.0)) {
        throw std::invalid_argument("convergence_threshold must be positive");
    }
}

int argmax_lowest(std::span<const double> values) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(values.size()); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

int select_action(std::span<const double> q_row, double epsilon, SplitMix64& rng,
                  int action_space_size) {
    if (rng.uniform01() < epsilon) {
        return static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(action_space_size)));
    }
    return argmax_lowest(q_row.first(static_cast<std::size_t>(action_space_size)));
}

double bellman_update(double current_q, double reward, double max_next_q, double alpha,
                      double gamma) {
    return current_q + alpha * (reward + gamma * max_next_q - current_q);
}

double decay_epsilon(double epsilon, double epsilon_decay_value, double epsilon_min) {
    return std::max(epsilon - epsilon_decay_value * 0.5, epsilon_min);
}

TrainResult train(Env& env, const TrainConfig& config) {
    config.validate();
    const WorkflowGraph& graph = env.graph();
    const int n_actions = graph.action_space_size;

    TrainResult result;
    result.q_table = QTable(graph.state_count, n_actions);

    // Exploration and outcome sampling draw from separate streams, both
    // derived from the config seed; the env's construction seed is
    // irrelevant once training starts.
    SplitMix64 explore_rng(derive_seed(config.seed, 0));
    env.reseed(derive_seed(config.seed, 1));

    std::vector<char> watched(static_cast<std::size_t>(graph.state_count) * n_actions, 0);
    if (config.watch) {
        for (const auto& [ws, wa] : *config.watch) {
            if (ws < 0 || ws >= graph.state_count || wa < 0 || wa >= n_actions) {
                throw std::invalid_argument("watched pair (" + std::to_string(ws) + ", " +
                                            std::to_string(wa) + ") outside the graph");
            }
            watched[static_cast<std::size_t>(ws) * n_actions + wa] = 1;
        }
    } else {
        for (int a = 0; a < n_actions; ++a) {
            watched[static_cast<std::size_t>(graph.initial_state) * n_actions + a] = 1;
        }
    }

    const double eps_decay = config.effective_epsilon_decay();
    double epsilon = config.epsilon_start;
    bool converged = false;

    for (int episode = 0; episode < config.episodes && !converged; ++episode) {
        int state = env.reset();
        double episodic_reward = 0.0;
        int steps = 0;
        result.epsilon_trace.push_back(epsilon);

        double episode_max_delta = 0.0;
        bool any_update = false;
        bool done = graph.is_terminal(state);

        while (!done && steps < config.max_steps_per_episode) {
            int action = select_action(result.q_table.row(state), epsilon, explore_rng, n_actions);
            StepResult sr = env.step(action);
            episodic_reward += sr.reward;
            ++steps;

            double current_q = result.q_table.at(state, action);
            auto next_row = result.q_table.row(sr.next_state);
            double max_next_q = *std::max_element(next_row.begin(), next_row.end());
            double new_q = bellman_update(current_q, sr.reward, max_next_q, config.alpha,
                                          config.gamma);
            result.q_table.at(state, action) = new_q;
            result.storage.push_back({current_q, new_q, episode, action});
            if (watched[static_cast<std::size_t>(state) * n_actions + action]) {
                result.storage_new.push_back({current_q, new_q, episode, action});
            }

            double delta = std::abs(new_q - current_q);
            any_update = true;
            episode_max_delta = std::max(episode_max_delta, delta);
            if (config.convergence_mode == ConvergenceMode::PerUpdate &&
                delta < config.convergence_threshold && new_q != current_q) {
                converged = true;
            }

            state = sr.next_state;
            done = sr.done;
            if (config.decay_epsilon_per_step) {
                epsilon = decay_epsilon(epsilon, eps_decay, config.epsilon_min);
            }
            if (converged) break;
        }

        if (config.convergence_mode == ConvergenceMode::EpisodeMaxDelta && any_update &&
            episode_max_delta < config.convergence_threshold) {
            converged = true;
        }
        result.reward_list.push_back({episodic_reward, episode, steps});
        if (converged) result.converged_at = episode;
        if (!config.decay_epsilon_per_step) {
            epsilon = decay_epsilon(epsilon, eps_decay, config.epsilon_min);
        }
    }
    return result;
}

Policy extract_policy(const QTable& q) {
    Policy policy;
    policy.actions.reserve(q.state_count());
    for (int s = 0; s < q.state_count(); ++s) {
        policy.actions.push_back(argmax_lowest(q.row(s)));
    }
    return policy;
}

namespace {

std::string format_q(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

}  // namespace

void save_qtable_csv(const QTable& q, std::ostream& out) {
    out << "state,action,q\n";
    for (int s = 0; s < q.state_count(); ++s) {
        for (int a = 0; a < q.action_count(); ++a) {
            out << s << ',' << a << ',' << format_q(q.at(s, a)) << '\n';
        }
    }
}

QTable load_qtable_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty Q-table file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "state,action,q") {
        throw ParseError("Q-table CSV must start with header \"state,action,q\"");
    }

    struct Row {
        int state;
        int action;
        double q;
    };
    std::vector<Row> rows;
    int max_state = -1;
    int max_action = -1;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        Row row{};
        char trailing;
        if (std::sscanf(line.c_str(), "%d,%d,%lf%c", &row.state, &row.action, &row.q,
                        &trailing) != 3) {
            throw ParseError("malformed Q-table CSV row at line " + std::to_string(line_no));
        }
        if (row.state < 0 || row.action < 0) {
            throw ParseError("negative state or action in Q-table CSV at line " +
                             std::to_string(line_no));
        }
        max_state = std::max(max_state, row.state);
        max_action = std::max(max_action, row.action);
        rows.push_back(row);
    }
    if (rows.empty()) throw ParseError("Q-table CSV has no data rows");

    QTable q(max_state + 1, max_action + 1);
    std::vector<char> seen(rows.size() > 0 ? static_cast<std::size_t>(max_state + 1) *
                                                 (max_action + 1)
                                           : 0,
                           0);
    for (const Row& row : rows) {
        std::size_t idx = static_cast<std::size_t>(row.state) * (max_action + 1) + row.action;
        if (seen[idx]) {
            throw ParseError("duplicate Q-table row for state " + std::to_string(row.state) +
                             ", action " + std::to_string(row.action));
        }
        seen[idx] = 1;
        q.at(row.state, row.action) = row.q;
    }
    for (int s = 0; s <= max_state; ++s) {
        for (int a = 0; a <= max_action; ++a) {
            if (!seen[static_cast<std::size_t>(s) * (max_action + 1) + a]) {
                throw ParseError("Q-table CSV missing row for state " + std::to_string(s) +
                                 ", action " + std::to_string(a));
            }
        }
    }
    return q;
}

std::string qtable_to_json(const QTable& q) {
    nlohmann::ordered_json doc;
    doc["state_count"] = q.state_count();
    doc["action_space_size"] = q.action_count();
    auto values = nlohmann::ordered_json::array();
    for (int s = 0; s < q.state_count(); ++s) {
        auto row = nlohmann::ordered_json::array();
        for (int a = 0; a < q.action_count(); ++a) row.push_back(q.at(s, a));
        values.push_back(std::move(row));
    }
    doc["q"] = std::move(values);
    return doc.dump(2) + "\n";
}

QTable qtable_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("Q-table JSON is invalid: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("state_count") || !doc.contains("action_space_size") ||
        !doc.contains("q")) {
        throw ParseError("Q-table JSON needs state_count, action_space_size and q");
    }
    int states = doc.at("state_count").get<int>();
    int actions = doc.at("action_space_size").get<int>();
    if (states <= 0 || actions <= 0) throw ParseError("Q-table dimensions must be positive");
    const auto& values = doc.at("q");
    if (!values.is_array() || static_cast<int>(values.size()) != states) {
        throw ParseError("Q-table JSON q array does not match state_count");
    }
    QTable q(states, actions);
    for (int s = 0; s < states; ++s) {
        const auto& row = values.at(s);
        if (!row.is_array() || static_cast<int>(row.size()) != actions) {
            throw ParseError("Q-table JSON row " + std::to_string(s) +
                             " does not match action_space_size");
        }
        for (int a = 0; a < actions; ++a) q.at(s, a) = row.at(a).get<double>();
    }
    return q;
}

}  // namespace malq
