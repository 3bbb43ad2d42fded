#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "malq/env.hpp"
#include "malq/qlearn.hpp"

namespace malq {

struct SweepConfig {
    std::vector<std::string> env_names = {"env_new1", "env_new2", "env_new3"};
    std::vector<double> learning_rates = {0.001, 0.01, 0.1, 0.2, 0.3, 0.4,
                                          0.5,   0.6,  0.7, 0.8, 0.9};
    TrainConfig base;
    std::vector<std::uint64_t> seeds = {0};
    // Tolerance of the value-iteration oracle behind policy_accuracy.
    double oracle_tolerance = 1e-9;
    // When false, per-cell training logs are dropped once the cell summary
    // is computed; large multi-seed sweeps stay small in memory.
    bool keep_train_logs = true;

    void validate() const;
};

struct CellKey {
    std::string env_name;
    double learning_rate = 0.0;
    std::uint64_t seed = 0;

    friend bool operator<(const CellKey& a, const CellKey& b) {
        return std::tie(a.env_name, a.learning_rate, a.seed) <
               std::tie(b.env_name, b.learning_rate, b.seed);
    }
    friend bool operator==(const CellKey&, const CellKey&) = default;
};

struct SweepCell {
    TrainResult train_result;
    // Episode index at which training converged; the episode cap when the
    // run never converged (flagged by `converged`).
    int episodes_to_convergence = 0;
    bool converged = false;
    double policy_accuracy = 0.0;

    friend bool operator==(const SweepCell&, const SweepCell&) = default;
};

struct SweepResult {
    std::map<CellKey, SweepCell> cells;

    friend bool operator==(const SweepResult&, const SweepResult&) = default;
};

// Per-state optimal actions; kNoAction marks states excluded from accuracy
// comparisons (e.g. terminals in a hand-authored list).
struct IdealPolicy {
    static constexpr int kNoAction = -1;
    std::vector<int> actions;
};

// Parses a hand-authored ideal-policy document: {"actions": [...]}, with
// -1 marking states excluded from accuracy comparisons.
IdealPolicy load_ideal_policy(const std::string& text);

// Exact dynamic-programming solve of the graph under one reward variant.
// Undefined actions are excluded, terminals are fixed at V = 0, and the
// greedy policy breaks ties toward the lowest action id (terminals get
// action 0 by convention). `initial` optionally warm-starts the sweep.
std::pair<std::vector<double>, IdealPolicy> value_iteration(
    const WorkflowGraph& graph, const EnvVariant& variant, double gamma, double tolerance,
    const std::vector<double>* initial = nullptr);

// Fraction of per-state matches, rounded half-up to exactly five decimal
// places. Positions where either side is kNoAction are excluded.
double get_acc(const std::vector<int>& ideal, const std::vector<int>& predicted);
double get_acc(const IdealPolicy& ideal, const Policy& predicted);

// Trains every (env, learning rate, seed) cell and scores it against the
// value-iteration ideal policy of its variant. Cells are independent;
// `jobs` > 1 runs them on a thread pool without changing any result.
SweepResult run_sweep(const WorkflowGraph& graph, const SweepConfig& config, int jobs = 1);

// Per learning rate, the median over seeds of episodes-to-convergence
// (non-converged cells count as the episode cap).
std::vector<std::pair<double, double>> convergence_curve(const SweepResult& result,
                                                         const std::string& env_name);

// Per learning rate, the median policy accuracy over seeds.
std::vector<std::pair<double, double>> accuracy_curve(const SweepResult& result,
                                                      const std::string& env_name);

}  // namespace malq
