#include "malq/env.hpp"

#include <stdexcept>

namespace malq {

std::string env_name(VariantKind kind) {
    switch (kind) {
        case VariantKind::Base: return "env_new1";
        case VariantKind::RewardShaped: return "env_new2";
        case VariantKind::TimePressure: return "env_new3";
    }
    throw std::logic_error("unreachable variant kind");
}

VariantKind variant_from_name(const std::string& name) {
    if (name == "env_new1" || name == "base") return VariantKind::Base;
    if (name == "env_new2" || name == "reward") return VariantKind::RewardShaped;
    if (name == "env_new3" || name == "time") return VariantKind::TimePressure;
    throw std::invalid_argument("unknown environment name \"" + name +
                                "\" (expected env_new1|env_new2|env_new3 or base|reward|time)");
}

EnvVariant EnvVariant::defaults(VariantKind kind) {
    switch (kind) {
        case VariantKind::Base: return {kind, -0.04, 2.0};
        case VariantKind::RewardShaped: return {kind, -0.04, 4.0};
        case VariantKind::TimePressure: return {kind, -0.1, 4.0};
    }
    throw std::logic_error("unreachable variant kind");
}

int Env::reset() {
    current_ = graph_->initial_state;
    return current_;
}

StepResult Env::step(int action) {
    if (graph_->is_terminal(current_)) {
        throw std::logic_error("step() on terminal state " + std::to_string(current_) +
                               "; reset the environment first");
    }
    if (action < 0 || action >= graph_->action_space_size) {
        throw std::invalid_argument("action " + std::to_string(action) + " outside [0, " +
                                    std::to_string(graph_->action_space_size) + ")");
    }

    const std::vector<Outcome>* outcomes = graph_->outcomes(current_, action);
    StepResult result;
    if (outcomes == nullptr) {
        // Undefined pair: penalized self-loop, keeps uniform exploration
        // over the full action space well-defined.
        result.next_state = current_;
        result.reward = variant_.step_penalty;
        result.done = false;
        result.no_op = true;
        return result;
    }

    const Outcome* chosen = &outcomes->front();
    if (outcomes->size() > 1) {
        double u = rng_.uniform01();
        double cumulative = 0.0;
        for (const Outcome& o : *outcomes) {
            cumulative += o.probability;
            chosen = &o;
            if (u < cumulative) break;
        }
    }

    result.next_state = chosen->next_state;
    result.done = chosen->done;
    result.no_op = false;
    if (chosen->reward_override) {
        result.reward = *chosen->reward_override;
    } else {
        result.reward = chosen->done ? variant_.terminal_reward : variant_.step_penalty;
    }
    current_ = result.next_state;
    return result;
}

std::vector<int> Env::available_actions(int state) const {
    if (state < 0 || state >= graph_->state_count) {
        throw std::invalid_argument("state " + std::to_string(state) + " outside [0, " +
                                    std::to_string(graph_->state_count) + ")");
    }
    return graph_->defined_actions(state);
}

Env make_env(const WorkflowGraph& graph, VariantKind kind, std::uint64_t seed,
             std::optional<double> step_penalty, std::optional<double> terminal_reward) {
    EnvVariant variant = EnvVariant::defaults(kind);
    if (step_penalty) variant.step_penalty = *step_penalty;
    if (terminal_reward) variant.terminal_reward = *terminal_reward;
    if (!(variant.step_penalty < 0.0)) {
        throw std::invalid_argument("step_penalty must be negative");
    }
    if (!(variant.terminal_reward > 0.0)) {
        throw std::invalid_argument("terminal_reward must be positive");
    }
    return Env(graph, variant, seed);
}

}  // namespace malq
