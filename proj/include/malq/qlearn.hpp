#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "malq/env.hpp"
#include "malq/rng.hpp"

namespace malq {

/// Dense state x action value matrix, zero-initialized.
class QTable {
public:
    QTable() = default;
    QTable(int state_count, int action_count)
        : states_(state_count), actions_(action_count),
          values_(static_cast<std::size_t>(state_count) * action_count, 0.0) {}

    double at(int state, int action) const { return values_[index(state, action)]; }
    double& at(int state, int action) { return values_[index(state, action)]; }
    std::span<const double> row(int state) const {
        return {values_.data() + index(state, 0), static_cast<std::size_t>(actions_)};
    }

    int state_count() const { return states_; }
    int action_count() const { return actions_; }

    friend bool operator==(const QTable&, const QTable&) = default;

private:
    std::size_t index(int state, int action) const {
        return static_cast<std::size_t>(state) * actions_ + action;
    }

    int states_ = 0;
    int actions_ = 0;
    std::vector<double> values_;
};

enum class ConvergenceMode {
    // Stop at the first update with |new_q - current_q| < threshold and
    // new_q != current_q (the literal published criterion).
    PerUpdate,
    // Stop when an episode's largest update magnitude falls below the
    // threshold (robust default; a lone tiny update no longer ends training).
    EpisodeMaxDelta,
};

struct TrainConfig {
    double alpha = 0.1;
    double gamma = 0.9;
    double epsilon_start = 0.9;
    double epsilon_min = 0.01;
    // Absent means (epsilon_start - epsilon_min) / episodes, which under the
    // x0.5 decay factor lands epsilon near the midpoint by the last episode.
    std::optional<double> epsilon_decay_value;
    int episodes = 10000;
    int max_steps_per_episode = 500;
    double convergence_threshold = 1e-4;
    ConvergenceMode convergence_mode = ConvergenceMode::EpisodeMaxDelta;
    // The published schedule decays per episode; per-step decay mirrors the
    // alternative placement inside the step loop.
    bool decay_epsilon_per_step = false;
    std::uint64_t seed = 0;
    // (state, action) pairs whose updates are copied into storage_new.
    // Absent means every action of the initial state.
    std::optional<std::vector<std::pair<int, int>>> watch;

    double effective_epsilon_decay() const;
    void validate() const;
};

struct EpisodeRecord {
    double episodic_reward = 0.0;
    int episode = 0;
    int steps = 0;

    friend bool operator==(const EpisodeRecord&, const EpisodeRecord&) = default;
};

struct UpdateRecord {
    double current_q = 0.0;
    double new_q = 0.0;
    int episode = 0;
    int action = 0;

    friend bool operator==(const UpdateRecord&, const UpdateRecord&) = default;
};

struct TrainResult {
    QTable q_table;
    std::vector<EpisodeRecord> reward_list;
    std::vector<UpdateRecord> storage;
    std::vector<UpdateRecord> storage_new;
    std::vector<double> epsilon_trace;
    std::optional<int> converged_at;

    friend bool operator==(const TrainResult&, const TrainResult&) = default;
};

struct Policy {
    std::vector<int> actions;

    friend bool operator==(const Policy&, const Policy&) = default;
};

// Argmax with ties broken toward the lowest index.
int argmax_lowest(std::span<const double> values);

// Epsilon-greedy selection: uniform random action with probability epsilon,
// argmax of the row otherwise.
int select_action(std::span<const double> q_row, double epsilon, SplitMix64& rng,
                  int action_space_size);

// current_q + alpha * (reward + gamma * max_next_q - current_q)
double bellman_update(double current_q, double reward, double max_next_q, double alpha,
                      double gamma);

// max(epsilon - epsilon_decay_value * 0.5, epsilon_min)
double decay_epsilon(double epsilon, double epsilon_decay_value, double epsilon_min);

// Runs the episode loop over the environment. Both random streams (action
// exploration and outcome sampling) are derived from config.seed, so the
// result is a pure function of (graph, config).
TrainResult train(Env& env, const TrainConfig& config);

Policy extract_policy(const QTable& q);

// Persistence: `state,action,q` CSV (17 significant digits) and an
// equivalent JSON document. Both round-trip losslessly.
void save_qtable_csv(const QTable& q, std::ostream& out);
QTable load_qtable_csv(std::istream& in);
std::string qtable_to_json(const QTable& q);
QTable qtable_from_json(const std::string& text);

}  // namespace malq
