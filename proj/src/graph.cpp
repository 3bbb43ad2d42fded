#include "malq/graph.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include <json.hpp>

#include "malq/rng.hpp"

namespace malq {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string pair_tag(int state, int action) {
    return "state " + std::to_string(state) + ", action " + std::to_string(action);
}

void require_keys(const json& obj, std::initializer_list<const char*> allowed,
                  const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* k) { return key == k; }) == allowed.end()) {
            throw ParseError("unknown key \"" + key + "\" in " + where);
        }
    }
}

int require_int(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw ParseError("missing key \"" + std::string(key) + "\" in " + where);
    const json& v = obj.at(key);
    if (!v.is_number_integer()) {
        throw ParseError("key \"" + std::string(key) + "\" in " + where + " must be an integer");
    }
    return v.get<int>();
}

}  // namespace

std::string to_string(TerminalLabel label) {
    return label == TerminalLabel::Malware ? "malware" : "benign";
}

TerminalLabel terminal_label_from_string(const std::string& text) {
    if (text == "malware") return TerminalLabel::Malware;
    if (text == "benign") return TerminalLabel::Benign;
    throw ParseError("terminal label must be \"malware\" or \"benign\", got \"" + text + "\"");
}

const std::vector<Outcome>* WorkflowGraph::outcomes(int state, int action) const {
    auto row = transitions.find(state);
    if (row == transitions.end()) return nullptr;
    auto cell = row->second.find(action);
    if (cell == row->second.end()) return nullptr;
    return &cell->second;
}

std::vector<int> WorkflowGraph::defined_actions(int state) const {
    std::vector<int> out;
    auto row = transitions.find(state);
    if (row == transitions.end()) return out;
    out.reserve(row->second.size());
    for (const auto& [action, outcomes] : row->second) {
        (void)outcomes;
        out.push_back(action);
    }
    return out;
}

void WorkflowGraph::validate() const {
    if (state_count <= 0) throw ValidationError("state_count must be positive");
    if (action_space_size <= 0) throw ValidationError("action_space_size must be positive");
    if (initial_state < 0 || initial_state >= state_count) {
        throw ValidationError("initial_state " + std::to_string(initial_state) +
                              " outside [0, " + std::to_string(state_count) + ")");
    }
    for (const auto& [state, label] : terminals) {
        (void)label;
        if (state < 0 || state >= state_count) {
            throw ValidationError("terminal state " + std::to_string(state) +
                                  " outside [0, " + std::to_string(state_count) + ")");
        }
    }
    for (const auto& [state, row] : transitions) {
        if (state < 0 || state >= state_count) {
            throw ValidationError("transition from undeclared state " + std::to_string(state));
        }
        if (is_terminal(state)) {
            throw ValidationError("terminal state " + std::to_string(state) +
                                  " must be absorbing (has outgoing transitions)");
        }
        if (row.empty()) {
            throw ValidationError("state " + std::to_string(state) + " has an empty transition row");
        }
        for (const auto& [action, outcomes] : row) {
            const std::string tag = pair_tag(state, action);
            if (action < 0 || action >= action_space_size) {
                throw ValidationError("action id outside action space at " + tag);
            }
            if (outcomes.empty()) {
                throw ValidationError("no outcomes defined at " + tag);
            }
            double total = 0.0;
            for (const Outcome& o : outcomes) {
                if (!(o.probability > 0.0) || o.probability > 1.0) {
                    throw ValidationError("outcome probability outside (0,1] at " + tag);
                }
                total += o.probability;
                if (o.next_state < 0 || o.next_state >= state_count) {
                    throw ValidationError("outcome next state " + std::to_string(o.next_state) +
                                          " outside [0, " + std::to_string(state_count) + ") at " + tag);
                }
                if (o.done != is_terminal(o.next_state)) {
                    throw ValidationError("done flag disagrees with terminal set at " + tag);
                }
            }
            if (std::abs(total - 1.0) > 1e-9) {
                throw ValidationError("probabilities sum != 1 at " + tag +
                                      " (sum = " + std::to_string(total) + ")");
            }
        }
    }
    for (int s = 0; s < state_count; ++s) {
        if (!is_terminal(s) && transitions.find(s) == transitions.end()) {
            throw ValidationError("non-terminal state " + std::to_string(s) +
                                  " has no defined action");
        }
    }
}

WorkflowGraph load_graph(std::istream& in) {
    // The format is plain UTF-8; a BOM is an error, and nlohmann would
    // silently skip one.
    if (in.peek() == 0xEF) {
        char bom[3] = {};
        in.read(bom, 3);
        if (in.gcount() == 3 && bom[0] == '\xEF' && bom[1] == '\xBB' && bom[2] == '\xBF') {
            throw ParseError("graph file must not start with a UTF-8 BOM");
        }
        throw ParseError("graph file is not valid UTF-8 JSON");
    }

    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("graph file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("graph document must be a JSON object");
    require_keys(doc, {"state_count", "action_space_size", "initial_state", "terminals",
                       "transitions"},
                 "graph document");

    WorkflowGraph g;
    g.state_count = require_int(doc, "state_count", "graph document");
    g.action_space_size = require_int(doc, "action_space_size", "graph document");
    g.initial_state = require_int(doc, "initial_state", "graph document");

    if (!doc.contains("terminals") || !doc.at("terminals").is_array()) {
        throw ParseError("graph document needs a \"terminals\" array");
    }
    for (const json& t : doc.at("terminals")) {
        if (!t.is_object()) throw ParseError("terminal entries must be objects");
        require_keys(t, {"state", "label"}, "terminal entry");
        int state = require_int(t, "state", "terminal entry");
        if (!t.contains("label") || !t.at("label").is_string()) {
            throw ParseError("terminal entry needs a string \"label\"");
        }
        if (g.terminals.count(state)) {
            throw ParseError("terminal state " + std::to_string(state) + " listed twice");
        }
        g.terminals.emplace(state, terminal_label_from_string(t.at("label").get<std::string>()));
    }

    if (!doc.contains("transitions") || !doc.at("transitions").is_array()) {
        throw ParseError("graph document needs a \"transitions\" array");
    }
    for (const json& tr : doc.at("transitions")) {
        if (!tr.is_object()) throw ParseError("transition entries must be objects");
        require_keys(tr, {"state", "action", "outcomes"}, "transition entry");
        int state = require_int(tr, "state", "transition entry");
        int action = require_int(tr, "action", "transition entry");
        const std::string tag = pair_tag(state, action);
        if (!tr.contains("outcomes") || !tr.at("outcomes").is_array()) {
            throw ParseError("transition entry needs an \"outcomes\" array at " + tag);
        }
        if (g.transitions[state].count(action)) {
            throw ParseError("duplicate transition entry for " + tag);
        }
        std::vector<Outcome>& outcomes = g.transitions[state][action];
        for (const json& o : tr.at("outcomes")) {
            if (!o.is_object()) throw ParseError("outcomes must be objects at " + tag);
            require_keys(o, {"p", "next", "reward_override", "done"}, "outcome at " + tag);
            Outcome out;
            if (!o.contains("p") || !o.at("p").is_number()) {
                throw ParseError("outcome needs numeric \"p\" at " + tag);
            }
            out.probability = o.at("p").get<double>();
            out.next_state = require_int(o, "next", "outcome at " + tag);
            if (o.contains("reward_override")) {
                if (!o.at("reward_override").is_number()) {
                    throw ParseError("reward_override must be a number at " + tag);
                }
                out.reward_override = o.at("reward_override").get<double>();
            }
            if (!o.contains("done") || !o.at("done").is_boolean()) {
                throw ParseError("outcome needs boolean \"done\" at " + tag);
            }
            out.done = o.at("done").get<bool>();
            outcomes.push_back(out);
        }
    }

    g.validate();
    return g;
}

WorkflowGraph load_graph_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open graph file: " + path);
    return load_graph(in);
}

std::string serialize_graph(const WorkflowGraph& graph) {
    ordered_json doc;
    doc["state_count"] = graph.state_count;
    doc["action_space_size"] = graph.action_space_size;
    doc["initial_state"] = graph.initial_state;
    doc["terminals"] = ordered_json::array();
    for (const auto& [state, label] : graph.terminals) {
        doc["terminals"].push_back({{"state", state}, {"label", to_string(label)}});
    }
    doc["transitions"] = ordered_json::array();
    for (const auto& [state, row] : graph.transitions) {
        for (const auto& [action, outcomes] : row) {
            ordered_json entry;
            entry["state"] = state;
            entry["action"] = action;
            entry["outcomes"] = ordered_json::array();
            for (const Outcome& o : outcomes) {
                ordered_json jo;
                jo["p"] = o.probability;
                jo["next"] = o.next_state;
                if (o.reward_override) jo["reward_override"] = *o.reward_override;
                jo["done"] = o.done;
                entry["outcomes"].push_back(std::move(jo));
            }
            doc["transitions"].push_back(std::move(entry));
        }
    }
    return doc.dump(2) + "\n";
}

namespace {

// Stage layout of the workflow, in investigation order. Each phase spans
// one or two stages (a phase is a short sequence of tool runs); widths sum
// to 67 and the last stage holds the classification terminals.
//   acquisition [1] | process enumeration [4,5] | DLL listing [5,5] |
//   handle monitoring [5,5] | network collection [5,5] |
//   registry analysis [5,5] | dump-and-compare [5,5] | classification [7]
constexpr std::array<int, 13> kLayerWidths = {1, 4, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 7};
constexpr int kActionSpace = 10;
constexpr int kDefinedPairTarget = 109;
constexpr int kMaxExtrasPerState = 3;

// Per-transition operation costs drawn from this band; distinct costs keep
// sibling action values separated so every state has a unique best action.
constexpr double kCostHigh = -0.04;
constexpr double kCostLow = -0.14;
constexpr double kValueGap = 0.025;
constexpr double kGamma = 0.9;

struct VariantConstants {
    double step_penalty;
    double terminal_reward;
};
// Base, RewardShaped, TimePressure defaults; the generator keeps action
// values separated under all three reward rules at once.
constexpr std::array<VariantConstants, 3> kVariants = {
    VariantConstants{-0.04, 2.0}, VariantConstants{-0.04, 4.0}, VariantConstants{-0.1, 4.0}};

struct PlannedEdge {
    int target = 0;
    bool terminal = false;
    double cost = 0.0;  // meaningful only for non-terminal targets
};

}  // namespace

WorkflowGraph generate_default_graph(std::uint64_t seed) {
    SplitMix64 rng(derive_seed(seed, 0x67726170));  // graph stream

    constexpr int kLayerCount = static_cast<int>(kLayerWidths.size());
    std::array<int, kLayerWidths.size() + 1> layer_start{};
    for (std::size_t i = 0; i < kLayerWidths.size(); ++i) {
        layer_start[i + 1] = layer_start[i] + kLayerWidths[i];
    }
    const int state_count = layer_start[kLayerCount];
    const int terminal_layer = kLayerCount - 1;
    auto layer_of = [&](int s) {
        int layer = 0;
        while (s >= layer_start[layer + 1]) ++layer;
        return layer;
    };
    auto state_at = [&](int layer, int index) { return layer_start[layer] + index; };

    // Terminal labels; at least one of each classification.
    std::vector<TerminalLabel> labels(kLayerWidths[terminal_layer]);
    for (auto& l : labels) {
        l = rng.uniform01() < 0.5 ? TerminalLabel::Malware : TerminalLabel::Benign;
    }
    if (std::count(labels.begin(), labels.end(), labels.front()) ==
        static_cast<long>(labels.size())) {
        labels.back() = labels.front() == TerminalLabel::Malware ? TerminalLabel::Benign
                                                                 : TerminalLabel::Malware;
    }

    // Edge plan, per state in action-id order. Coverage edges first: every
    // state of layer L+1 gets a parent in layer L, so the whole workflow is
    // reachable from the acquisition state.
    std::vector<std::vector<PlannedEdge>> plan(state_count);
    int pair_count = 0;
    for (int layer = 0; layer + 1 < static_cast<int>(kLayerWidths.size()); ++layer) {
        for (int j = 0; j < kLayerWidths[layer + 1]; ++j) {
            int parent = state_at(layer, j % kLayerWidths[layer]);
            int target = state_at(layer + 1, j);
            plan[parent].push_back({target, layer + 1 == terminal_layer, 0.0});
            ++pair_count;
        }
    }
    // Layers can narrow (dump-and-compare feeds fewer classification
    // outcomes), leaving some states without a coverage edge.
    for (int s = 0; s < state_count; ++s) {
        int layer = layer_of(s);
        if (layer == terminal_layer || !plan[s].empty()) continue;
        int target = state_at(layer + 1,
                              static_cast<int>(rng.uniform_int(kLayerWidths[layer + 1])));
        plan[s].push_back({target, layer + 1 == terminal_layer, 0.0});
        ++pair_count;
    }

    // Alternative-route edges up to the 109 defined pairs: deeper targets in
    // the next stage, or a stage skip. Placement is biased toward the early
    // stages (min of two draws), where investigations genuinely branch; it
    // also spreads training trajectories across the whole workflow instead
    // of funnelling them down one rail. Classification edges stay unique per
    // state: two terminal routes from one state would tie exactly.
    std::vector<int> extras(state_count, 0);
    int guard = 0;
    while (pair_count < kDefinedPairTarget) {
        if (++guard > 200000) break;  // cannot trigger with these widths
        int draw_a = static_cast<int>(rng.uniform_int(terminal_layer - 1));
        int draw_b = static_cast<int>(rng.uniform_int(terminal_layer - 1));
        int layer = std::min(draw_a, draw_b);
        int s = state_at(layer, static_cast<int>(rng.uniform_int(kLayerWidths[layer])));
        if (extras[s] >= kMaxExtrasPerState ||
            static_cast<int>(plan[s].size()) >= kActionSpace) {
            continue;
        }
        // Stage skips dominate: they separate the alternative's value from
        // the canonical route by a whole stage, not just an operation cost.
        int target_layer = layer + (rng.uniform01() < 0.6 ? 2 : 1);
        if (target_layer > terminal_layer) continue;
        int target = state_at(target_layer,
                              static_cast<int>(rng.uniform_int(kLayerWidths[target_layer])));
        bool duplicate = false;
        bool has_terminal_route = false;
        for (const PlannedEdge& e : plan[s]) {
            duplicate |= e.target == target;
            has_terminal_route |= e.terminal;
        }
        if (duplicate) continue;
        bool to_terminal = target_layer == terminal_layer;
        if (to_terminal && has_terminal_route) continue;
        plan[s].push_back({target, to_terminal, 0.0});
        ++extras[s];
        ++pair_count;
    }

    // Assign costs walking the phases backward, tracking exact state values
    // under all three reward variants so each edge cost can be drawn with a
    // minimum action-value separation from its siblings.
    std::vector<std::array<double, 3>> value(state_count, {0.0, 0.0, 0.0});
    auto edge_values = [&](const PlannedEdge& e, double cost) {
        std::array<double, 3> q{};
        for (std::size_t v = 0; v < kVariants.size(); ++v) {
            q[v] = e.terminal ? kVariants[v].terminal_reward : cost + kGamma * value[e.target][v];
        }
        return q;
    };
    for (int layer = terminal_layer - 1; layer >= 0; --layer) {
        for (int idx = 0; idx < kLayerWidths[layer]; ++idx) {
            int s = state_at(layer, idx);
            std::vector<std::array<double, 3>> accepted;
            for (PlannedEdge& e : plan[s]) {
                if (e.terminal) {
                    accepted.push_back(edge_values(e, 0.0));
                    continue;
                }
                double best_cost = 0.0;
                double best_gap = -1.0;
                for (int attempt = 0; attempt < 64; ++attempt) {
                    double cost = kCostLow + (kCostHigh - kCostLow) * rng.uniform01();
                    auto q = edge_values(e, cost);
                    double gap = 1e9;
                    for (const auto& other : accepted) {
                        for (std::size_t v = 0; v < q.size(); ++v) {
                            gap = std::min(gap, std::abs(q[v] - other[v]));
                        }
                    }
                    if (gap > best_gap) {
                        best_gap = gap;
                        best_cost = cost;
                    }
                    if (gap >= kValueGap) break;
                }
                e.cost = best_cost;
                accepted.push_back(edge_values(e, best_cost));
            }
            for (std::size_t v = 0; v < kVariants.size(); ++v) {
                double best = accepted.front()[v];
                for (const auto& q : accepted) best = std::max(best, q[v]);
                value[s][v] = best;
            }
        }
    }

    WorkflowGraph g;
    g.state_count = state_count;
    g.action_space_size = kActionSpace;
    g.initial_state = 0;
    for (int j = 0; j < kLayerWidths[terminal_layer]; ++j) {
        g.terminals.emplace(state_at(terminal_layer, j), labels[j]);
    }
    for (int s = 0; s < state_count; ++s) {
        for (std::size_t a = 0; a < plan[s].size(); ++a) {
            const PlannedEdge& e = plan[s][a];
            Outcome o;
            o.probability = 1.0;
            o.next_state = e.target;
            o.done = e.terminal;
            if (!e.terminal) o.reward_override = e.cost;
            g.transitions[s][static_cast<int>(a)].push_back(o);
        }
    }
    g.validate();
    return g;
}

GraphStats graph_stats(const WorkflowGraph& graph) {
    GraphStats stats;
    for (const auto& [state, row] : graph.transitions) {
        stats.per_state_action_counts[state] = static_cast<int>(row.size());
        stats.defined_pair_count += static_cast<int>(row.size());
    }
    stats.terminal_count = static_cast<int>(graph.terminals.size());
    return stats;
}

}  // namespace malq
