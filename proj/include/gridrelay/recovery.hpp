#pragma once
// recovery.hpp - failure detection, the rule-based recovery oracle, feasibility
// filtering of proposals, and soft reset of the navigation context.

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "co_occurrence.hpp"
#include "core.hpp"
#include "planner.hpp"
#include "scene_graph.hpp"
#include "semantic_grid.hpp"
#include "subgoal.hpp"

namespace gridrelay {

enum class FailureKind { UnreachableAnchor, AnchorLoop, Timeout, NoValidSubgoal };

inline std::string_view to_string(FailureKind k) {
    switch (k) {
        case FailureKind::UnreachableAnchor: return "unreachable-anchor";
        case FailureKind::AnchorLoop: return "anchor-loop";
        case FailureKind::Timeout: return "timeout";
        case FailureKind::NoValidSubgoal: return "no-valid-subgoal";
    }
    return "timeout";
}

inline FailureKind failure_kind_from_string(std::string_view s) {
    for (FailureKind k : {FailureKind::UnreachableAnchor, FailureKind::AnchorLoop, FailureKind::Timeout,
                          FailureKind::NoValidSubgoal})
        if (to_string(k) == s) return k;
    throw Error(ErrorCode::InvalidInput, "unknown failure kind " + std::string(s));
}

struct FailureReport {
    FailureKind kind = FailureKind::Timeout;
    int timestep = 0;
    std::string anchor;                   // anchor involved, empty for timeout
    std::vector<std::string> visited;     // anchors reached so far, in order
    std::vector<std::string> failed;      // every anchor that has failed so far, this one included
    std::vector<std::string> candidates;  // categories the oracle may propose
    SceneGraph graph;                     // snapshot at failure time
    std::vector<std::string> diagnostics;
};

struct RecoveryProposal {
    std::string anchor;
    std::vector<std::string> chain;
    std::map<std::string, double> scores;
    std::string source = "rule";
};

struct FailureConfig {
    int step_budget = 500;
    int loop_threshold = 3;
};

// Everything detect_failure inspects, as observed by the episode loop.
struct FailureSignals {
    int step = 0;
    std::vector<std::string> targeted;  // anchor targeted at each high-level decision
    std::optional<std::string> no_path_anchor;
    bool no_valid_subgoal = false;
    std::string last_anchor;  // for no-valid-subgoal reports
};

// Rules in priority order: timeout, unreachable anchor, anchor loop, no valid subgoal.
inline std::optional<FailureReport> detect_failure(const FailureSignals& s, const FailureConfig& cfg = {}) {
    FailureReport r;
    r.timestep = s.step;
    if (s.step >= cfg.step_budget) {
        r.kind = FailureKind::Timeout;
        r.diagnostics.push_back("step budget " + std::to_string(cfg.step_budget) + " exhausted");
        return r;
    }
    if (s.no_path_anchor) {
        r.kind = FailureKind::UnreachableAnchor;
        r.anchor = *s.no_path_anchor;
        r.diagnostics.push_back("Anchor " + r.anchor + " was unreachable");
        return r;
    }
    if (!s.targeted.empty()) {
        const std::string& last = s.targeted.back();
        const auto n = std::count(s.targeted.begin(), s.targeted.end(), last);
        if (n >= cfg.loop_threshold) {
            r.kind = FailureKind::AnchorLoop;
            r.anchor = last;
            r.diagnostics.push_back("Anchor " + last + " targeted " + std::to_string(n) + " times");
            return r;
        }
    }
    if (s.no_valid_subgoal) {
        r.kind = FailureKind::NoValidSubgoal;
        r.anchor = s.last_anchor;
        r.diagnostics.push_back("no subgoal candidate passed validation");
        return r;
    }
    return std::nullopt;
}

// Excludes visited and failed anchors (and the goal), then searches the best
// relay chain of at least one hop over what remains.
inline RecoveryProposal rule_based_oracle(const FailureReport& report, const CoOccurrenceGraph& g,
                                          const std::string& goal, const RelayConfig& cfg = {}) {
    const auto gi = g.index_of(goal);
    if (!gi) throw Error(ErrorCode::NotFound, "unknown goal " + goal);
    std::set<std::string> excluded(report.visited.begin(), report.visited.end());
    excluded.insert(report.failed.begin(), report.failed.end());
    if (!report.anchor.empty() && report.kind != FailureKind::Timeout) excluded.insert(report.anchor);
    excluded.insert(goal);

    std::vector<char> allowed(g.size(), 0);
    bool any = false;
    std::set<std::string> pool;
    if (report.candidates.empty()) pool.insert(g.categories().begin(), g.categories().end());
    else pool.insert(report.candidates.begin(), report.candidates.end());
    for (const auto& c : pool) {
        if (excluded.count(c)) continue;
        if (auto i = g.index_of(c)) {
            allowed[*i] = 1;
            any = true;
        }
    }
    if (!any) throw Error(ErrorCode::RecoveryExhausted, "no categories remain for recovery");
    RelayConfig c = cfg;
    c.max_hops = std::max(1, cfg.max_hops);
    const RelayChain chain = best_relay_chain(g, RelaySearch{std::nullopt, *gi, allowed, 1}, c);

    RecoveryProposal p;
    p.chain = chain.anchors;
    p.anchor = p.chain.front();
    for (std::size_t i = 0; i < g.size(); ++i)
        if (allowed[i]) p.scores[g.categories()[i]] = g.weight(i, *gi);
    return p;
}

// Keeps the chain entries that pass grounding and reachability.
inline RecoveryProposal filter_proposal(const RecoveryProposal& p, const SceneGraph& scene,
                                        const ReachabilityField& field, const ValidationConfig& cfg = {}) {
    RecoveryProposal out = p;
    out.chain.clear();
    std::vector<std::string> entries = p.chain;
    if (entries.empty() && !p.anchor.empty()) entries.push_back(p.anchor);
    for (const auto& a : entries) {
        if (std::find(out.chain.begin(), out.chain.end(), a) != out.chain.end()) continue;
        if (validate(Subgoal{Action::Goto, a}, scene, field, {}, {}, cfg)) out.chain.push_back(a);
    }
    if (out.chain.empty()) throw Error(ErrorCode::RecoveryExhausted, "no proposed anchor is feasible");
    out.anchor = out.chain.front();
    return out;
}

inline RecoveryProposal filter_proposal(const RecoveryProposal& p, const SemanticGrid& grid, const SceneGraph& scene,
                                        const Pose& pose, const ValidationConfig& cfg = {}) {
    return filter_proposal(p, scene, ReachabilityField(grid, pose.position, cfg.reach), cfg);
}

// Navigation context owned by the episode loop.
struct NavigationContext {
    Pose pose{};
    SemanticGrid grid;
    SceneGraph scene;
    std::deque<std::string> chain;  // pending anchors
    std::optional<std::string> target;
    std::optional<DStarLite> planner;
    int step = 0;
    std::vector<FailureReport> failures;
    std::vector<std::string> visited;
    std::vector<std::string> failed_anchors;
};

// Replaces the anchor chain and drops the planner; pose, map, memory, step
// counter and failure history are untouched.
inline NavigationContext& soft_reset(NavigationContext& ctx, const RecoveryProposal& accepted) {
    if (accepted.chain.empty()) throw Error(ErrorCode::InvalidInput, "empty recovery proposal");
    ctx.chain.assign(accepted.chain.begin(), accepted.chain.end());
    ctx.target.reset();
    ctx.planner.reset();
    return ctx;
}

}  // namespace gridrelay
