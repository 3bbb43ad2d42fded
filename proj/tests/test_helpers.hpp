#pragma once

#include <string>

#include "malq/graph.hpp"
#include "malq/rng.hpp"

namespace malq::testing {

// s0 -> s1 -> ... -> s(n-1), action 0 advances, last state is a malware
// terminal. action_space > 1 leaves the higher ids undefined (no-ops).
inline WorkflowGraph make_chain_graph(int states, int action_space) {
    WorkflowGraph g;
    g.state_count = states;
    g.action_space_size = action_space;
    g.initial_state = 0;
    g.terminals.emplace(states - 1, TerminalLabel::Malware);
    for (int s = 0; s + 1 < states; ++s) {
        Outcome o;
        o.probability = 1.0;
        o.next_state = s + 1;
        o.done = s + 1 == states - 1;
        g.transitions[s][0].push_back(o);
    }
    g.validate();
    return g;
}

// Random valid graph: ordered states, a chain backbone for reachability,
// random extra forward actions, optional two-way stochastic outcomes and
// reward overrides. Exercises the full file format.
inline WorkflowGraph random_graph(SplitMix64& rng, bool deterministic) {
    int states = 3 + static_cast<int>(rng.uniform_int(8));   // 3..10
    int actions = 2 + static_cast<int>(rng.uniform_int(3));  // 2..4
    WorkflowGraph g;
    g.state_count = states;
    g.action_space_size = actions;
    g.initial_state = 0;
    g.terminals.emplace(states - 1, TerminalLabel::Malware);
    if (states > 4 && rng.uniform01() < 0.3) {
        g.terminals.emplace(states - 2, TerminalLabel::Benign);
    }

    auto add_action = [&](int s, int a, int primary) {
        Outcome first;
        first.next_state = primary;
        first.done = g.is_terminal(primary);
        if (rng.uniform01() < 0.3) first.reward_override = -0.5 + rng.uniform01();
        if (!deterministic && rng.uniform01() < 0.5) {
            int alt = s + 1 + static_cast<int>(rng.uniform_int(states - s - 1));
            double p = 0.2 + 0.6 * rng.uniform01();
            first.probability = p;
            Outcome second;
            second.probability = 1.0 - p;
            second.next_state = alt;
            second.done = g.is_terminal(alt);
            g.transitions[s][a] = {first, second};
            return;
        }
        first.probability = 1.0;
        g.transitions[s][a] = {first};
    };

    for (int s = 0; s < states; ++s) {
        if (g.is_terminal(s)) continue;
        add_action(s, 0, s + 1);
        for (int a = 1; a < actions; ++a) {
            if (rng.uniform01() < 0.4) {
                int target = s + 1 + static_cast<int>(rng.uniform_int(states - s - 1));
                add_action(s, a, target);
            }
        }
    }
    g.validate();
    return g;
}

inline std::string data_file(const std::string& name) {
    return std::string(MALQ_DATA_DIR) + "/" + name;
}

}  // namespace malq::testing
