#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "malq/graph.hpp"
#include "malq/rng.hpp"

namespace malq {

enum class VariantKind { Base, RewardShaped, TimePressure };

// Canonical sweep names: env_new1 = Base, env_new2 = RewardShaped,
// env_new3 = TimePressure.
std::string env_name(VariantKind kind);
// Accepts env_new1..3 as well as base / reward / time.
VariantKind variant_from_name(const std::string& name);

// Reward rule of one environment flavour. The constants are
// hyperparameters; the factory checks their signs.
struct EnvVariant {
    VariantKind kind = VariantKind::Base;
    double step_penalty = -0.04;
    double terminal_reward = 2.0;

    static EnvVariant defaults(VariantKind kind);
};

struct StepResult {
    int next_state = 0;
    double reward = 0.0;
    bool done = false;
    // Diagnostic: the action had no defined transition and the step was a
    // penalized self-loop.
    bool no_op = false;
};

/// Agent-facing MDP simulator over an immutable WorkflowGraph. Single-owner
/// mutable; several Env instances may share one graph.
class Env {
public:
    Env(const WorkflowGraph& graph, EnvVariant variant, std::uint64_t seed)
        : graph_(&graph), variant_(variant), current_(graph.initial_state), rng_(seed) {}

    // Moves to the initial state and returns it. The outcome-sampling
    // stream is not reseeded.
    int reset();

    // Samples one transition. Undefined (state, action) pairs are
    // penalized self-loops; stepping a terminal state is a contract
    // violation and throws.
    StepResult step(int action);

    // Actions with defined transitions from `state`; empty for terminals.
    std::vector<int> available_actions(int state) const;

    int current_state() const { return current_; }
    const WorkflowGraph& graph() const { return *graph_; }
    const EnvVariant& variant() const { return variant_; }
    void reseed(std::uint64_t seed) { rng_.reseed(seed); }

private:
    const WorkflowGraph* graph_;
    EnvVariant variant_;
    int current_;
    SplitMix64 rng_;
};

// Builds an environment with the variant defaults, or with explicit reward
// constants. Overrides that break the sign invariants are rejected.
Env make_env(const WorkflowGraph& graph, VariantKind kind, std::uint64_t seed,
             std::optional<double> step_penalty = std::nullopt,
             std::optional<double> terminal_reward = std::nullopt);

}  // namespace malq
