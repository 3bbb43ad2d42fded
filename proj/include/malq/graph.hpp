#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace malq {

// Thrown when an input document cannot be decoded at all.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Thrown when a decoded document violates a model invariant. The message
// names the invariant and the offending state/action.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class TerminalLabel { Malware, Benign };

std::string to_string(TerminalLabel label);
TerminalLabel terminal_label_from_string(const std::string& text);

// One weighted branch of a (state, action) transition.
struct Outcome {
    double probability = 1.0;
    int next_state = 0;
    // When absent, the environment's variant reward rule applies.
    std::optional<double> reward_override;
    bool done = false;

    friend bool operator==(const Outcome&, const Outcome&) = default;
};

struct GraphStats {
    int defined_pair_count = 0;
    std::map<int, int> per_state_action_counts;
    int terminal_count = 0;
};

/// The MDP behind the malware-investigation workflow: states, per-(state,
/// action) outcome distributions, and labelled terminal states. Instances
/// are immutable once validated and safe to share across threads.
class WorkflowGraph {
public:
    int state_count = 0;
    int action_space_size = 0;
    int initial_state = 0;
    std::map<int, TerminalLabel> terminals;
    // state -> action -> ordered outcomes. Ordered maps keep serialization
    // and traversal deterministic.
    std::map<int, std::map<int, std::vector<Outcome>>> transitions;

    bool is_terminal(int state) const { return terminals.count(state) != 0; }

    // Null when the pair has no defined transition.
    const std::vector<Outcome>* outcomes(int state, int action) const;

    // Ascending action ids with defined transitions; empty for terminals.
    std::vector<int> defined_actions(int state) const;

    // Throws ValidationError naming the first violated invariant.
    void validate() const;

    friend bool operator==(const WorkflowGraph&, const WorkflowGraph&) = default;
};

// Parses and validates the JSON graph document. Unknown keys are rejected,
// as is a UTF-8 BOM.
WorkflowGraph load_graph(std::istream& in);
WorkflowGraph load_graph_file(const std::string& path);

// Canonical JSON serialization; load_graph(serialize_graph(g)) == g.
std::string serialize_graph(const WorkflowGraph& graph);

// Deterministically builds the canonical 67-state investigation workflow:
// a layered DAG over the acquisition -> process enumeration -> DLL listing
// -> handle monitoring -> network collection -> registry analysis ->
// dump-and-compare -> classification phases, with exactly 109 defined
// (state, action) pairs. Pure function of the seed.
WorkflowGraph generate_default_graph(std::uint64_t seed);

GraphStats graph_stats(const WorkflowGraph& graph);

}  // namespace malq
