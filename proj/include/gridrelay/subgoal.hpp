#pragma once
// subgoal.hpp - tabular behavioral-cloning subgoal model, fusion with the
// co-occurrence prior, and the grounding / feasibility / redundancy filter.

#include <algorithm>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "co_occurrence.hpp"
#include "core.hpp"
#include "scene_graph.hpp"
#include "semantic_grid.hpp"

namespace gridrelay {

enum class Action { Goto, Inspect, Interact };
inline constexpr Action kActions[] = {Action::Goto, Action::Inspect, Action::Interact};

inline std::string_view to_string(Action a) {
    switch (a) {
        case Action::Goto: return "goto";
        case Action::Inspect: return "inspect";
        case Action::Interact: return "interact";
    }
    return "goto";
}

inline Action action_from_string(std::string_view s) {
    for (Action a : kActions)
        if (to_string(a) == s) return a;
    throw Error(ErrorCode::InvalidInput, "unknown action " + std::string(s));
}

// Ordering is the tie-break order: action (goto < inspect < interact), then anchor.
struct Subgoal {
    Action action = Action::Goto;
    std::string anchor;
    friend auto operator<=>(const Subgoal&, const Subgoal&) = default;
};

inline std::string to_string(const Subgoal& s) { return std::string(to_string(s.action)) + ":" + s.anchor; }

inline Subgoal subgoal_from_string(std::string_view s) {
    const auto colon = s.find(':');
    if (colon == std::string_view::npos) throw Error(ErrorCode::InvalidInput, "expected action:anchor");
    Subgoal g{action_from_string(trim(s.substr(0, colon))), trim(s.substr(colon + 1))};
    if (g.anchor.empty()) throw Error(ErrorCode::InvalidInput, "empty anchor");
    return g;
}

struct Demonstration {
    std::string goal;
    std::vector<Subgoal> subgoals;
    friend bool operator==(const Demonstration&, const Demonstration&) = default;
};

// One demonstration per line: goal;action:anchor;action:anchor...
inline std::vector<Demonstration> read_demonstrations(std::istream& is) {
    std::vector<Demonstration> out;
    std::string line;
    while (std::getline(is, line)) {
        if (trim(line).empty()) continue;
        std::stringstream ss(line);
        std::string field;
        Demonstration d;
        std::getline(ss, field, ';');
        d.goal = trim(field);
        while (std::getline(ss, field, ';'))
            if (!trim(field).empty()) d.subgoals.push_back(subgoal_from_string(field));
        out.push_back(std::move(d));
    }
    return out;
}

inline void write_demonstrations(std::ostream& os, const std::vector<Demonstration>& demos) {
    for (const auto& d : demos) {
        os << d.goal;
        for (const auto& s : d.subgoals) os << ';' << to_string(s);
        os << '\n';
    }
}

inline constexpr const char* kStartContext = "START";
using SubgoalDist = std::map<Subgoal, double>;

// Counts of (goal, previous anchor or START) -> next subgoal, with add-k smoothing
// over the full subgoal space (actions x vocabulary).
class SubgoalModel {
public:
    using Context = std::pair<std::string, std::string>;

    SubgoalModel() = default;

    static SubgoalModel fit(const std::vector<Demonstration>& demos, std::vector<std::string> vocabulary,
                            double smoothing = 0.1) {
        if (!(smoothing >= 0)) throw Error(ErrorCode::InvalidParameter, "smoothing must be nonnegative");
        SubgoalModel m;
        m.k_ = smoothing;
        std::set<std::string> vocab(vocabulary.begin(), vocabulary.end());
        for (const auto& d : demos)
            for (const auto& s : d.subgoals) vocab.insert(s.anchor);
        m.vocab_.assign(vocab.begin(), vocab.end());
        for (const auto& d : demos) {
            std::string prev = kStartContext;
            for (const auto& s : d.subgoals) {
                auto& row = m.counts_[{d.goal, prev}];
                ++row.first[s];
                ++row.second;
                prev = s.anchor;
            }
        }
        return m;
    }

    const std::vector<std::string>& vocabulary() const { return vocab_; }
    double smoothing() const { return k_; }
    std::size_t space_size() const { return vocab_.size() * std::size(kActions); }
    bool seen(const std::string& goal, const std::string& prev) const { return counts_.count({goal, prev}) > 0; }

    double probability(const std::string& goal, const std::string& prev, const Subgoal& s) const {
        const double n = static_cast<double>(space_size());
        auto it = counts_.find({goal, prev});
        if (it == counts_.end() || (it->second.second == 0)) return n > 0 ? 1.0 / n : 0.0;
        const auto& [row, total] = it->second;
        auto c = row.find(s);
        const double count = c == row.end() ? 0.0 : static_cast<double>(c->second);
        // an unseen total with k = 0 falls back to uniform above
        return (count + k_) / (static_cast<double>(total) + k_ * n);
    }

    SubgoalDist distribution(const std::string& goal, const std::string& prev) const {
        SubgoalDist d;
        for (Action a : kActions)
            for (const auto& v : vocab_) {
                Subgoal s{a, v};
                d[s] = probability(goal, prev, s);
            }
        return d;
    }

private:
    std::vector<std::string> vocab_;
    double k_ = 0.1;
    std::map<Context, std::pair<std::map<Subgoal, long>, long>> counts_;
};

struct FusionConfig {
    double lambda_fuse = 0.5;
    void validate() const {
        if (!(lambda_fuse >= 0 && lambda_fuse <= 1)) throw Error(ErrorCode::InvalidParameter, "lambda_fuse");
    }
};

// score(a, o) = lambda * P(a, o) + (1 - lambda) * R(o); not renormalized.
inline SubgoalDist fuse(const SubgoalDist& model_dist, const std::map<std::string, double>& prior_row,
                        const FusionConfig& cfg) {
    cfg.validate();
    SubgoalDist out;
    for (const auto& [s, p] : model_dist) {
        auto it = prior_row.find(s.anchor);
        const double r = it == prior_row.end() ? 0.0 : it->second;
        out[s] = cfg.lambda_fuse * p + (1.0 - cfg.lambda_fuse) * r;
    }
    return out;
}

// Prior row R(o, goal) over the vocabulary. The goal is maximally related to itself.
inline std::map<std::string, double> prior_row(const CoOccurrenceGraph& g, const std::vector<std::string>& vocab,
                                               const std::string& goal) {
    std::map<std::string, double> row;
    for (const auto& v : vocab) row[v] = v == goal ? 1.0 : g.weight(v, goal);
    return row;
}

// Symmetric synonym groups; a category is always its own synonym.
class SynonymTable {
public:
    SynonymTable() = default;
    explicit SynonymTable(std::vector<std::set<std::string>> groups) : groups_(std::move(groups)) {}

    std::set<std::string> synonyms(const std::string& c) const {
        std::set<std::string> s{c};
        for (const auto& g : groups_)
            if (g.count(c)) s.insert(g.begin(), g.end());
        return s;
    }
    const std::vector<std::set<std::string>>& groups() const { return groups_; }

private:
    std::vector<std::set<std::string>> groups_;
};

enum class RejectReason { Grounding, Feasibility, Redundancy };

inline std::string_view to_string(RejectReason r) {
    switch (r) {
        case RejectReason::Grounding: return "grounding";
        case RejectReason::Feasibility: return "feasibility";
        case RejectReason::Redundancy: return "redundancy";
    }
    return "grounding";
}

struct Verdict {
    bool accepted = false;
    std::optional<RejectReason> reason;
    std::string node_id;  // grounded node used for the feasibility check
    Vec2 anchor_position{};
    explicit operator bool() const { return accepted; }
};

struct ValidationConfig {
    double min_confidence = 0.3;
    double reach_eps = 1.0;  // m
    ReachConfig reach{};
};

// Stage 1: a node of the anchor category with enough confidence. Stage 2: one
// of those nodes is reachable (highest confidence wins). Stage 3: no accepted
// subgoal of the same action names the anchor or one of its synonyms.
inline Verdict validate(const Subgoal& s, const SceneGraph& scene, const ReachabilityField& field,
                        const std::vector<Subgoal>& accepted, const SynonymTable& synonyms,
                        const ValidationConfig& cfg) {
    Verdict v;
    std::vector<const SceneNode*> grounded;
    for (const auto& n : scene.nodes())
        if (n.label == s.anchor && n.confidence >= cfg.min_confidence) grounded.push_back(&n);
    if (grounded.empty()) {
        v.reason = RejectReason::Grounding;
        return v;
    }
    std::stable_sort(grounded.begin(), grounded.end(),
                     [](const SceneNode* a, const SceneNode* b) { return a->confidence > b->confidence; });
    const SceneNode* pick = nullptr;
    for (const SceneNode* n : grounded)
        if (field.reaches(n->position.xy(), cfg.reach_eps)) {
            pick = n;
            break;
        }
    if (!pick) {
        v.reason = RejectReason::Feasibility;
        return v;
    }
    v.node_id = pick->id;
    v.anchor_position = pick->position.xy();
    const auto syn = synonyms.synonyms(s.anchor);
    for (const auto& a : accepted)
        if (a.action == s.action && syn.count(a.anchor)) {
            v.reason = RejectReason::Redundancy;
            return v;
        }
    v.accepted = true;
    return v;
}

inline Verdict validate(const Subgoal& s, const SceneGraph& scene, const SemanticGrid& grid, const Pose& pose,
                        const std::vector<Subgoal>& accepted, const SynonymTable& synonyms,
                        const ValidationConfig& cfg = {}) {
    if (!(cfg.reach_eps >= grid.resolution())) throw Error(ErrorCode::InvalidParameter, "reach_eps");
    return validate(s, scene, ReachabilityField(grid, pose.position, cfg.reach), accepted, synonyms, cfg);
}

struct ScoredSubgoal {
    Subgoal subgoal;
    double score = 0.0;
};

// Fused scores sorted descending; ties by subgoal order.
inline std::vector<ScoredSubgoal> rank_subgoals(const SubgoalDist& fused) {
    std::vector<ScoredSubgoal> out;
    for (const auto& [s, v] : fused) out.push_back({s, v});
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
    return out;
}

struct SubgoalChoice {
    Subgoal subgoal;
    double score = 0.0;
    Verdict verdict;
};

struct SubgoalQuery {
    std::string goal;
    std::string context = kStartContext;  // previous anchor
    std::vector<Subgoal> accepted;
    double min_score = 0.0;  // candidates scoring below this are not considered
    std::set<std::string> anchors;  // when nonempty, other anchors are skipped
    std::set<Action> actions{Action::Goto, Action::Inspect, Action::Interact};
};

// First candidate in fused-score order that passes validation.
inline SubgoalChoice next_subgoal(const SubgoalModel& model, const CoOccurrenceGraph& prior, const SubgoalQuery& q,
                                  const SceneGraph& scene, const ReachabilityField& field,
                                  const SynonymTable& synonyms, const FusionConfig& fusion,
                                  const ValidationConfig& vcfg) {
    if (model.vocabulary().empty()) throw Error(ErrorCode::InvalidInput, "empty vocabulary");
    const auto fused = fuse(model.distribution(q.goal, q.context), prior_row(prior, model.vocabulary(), q.goal), fusion);
    for (const auto& c : rank_subgoals(fused)) {
        if (c.score < q.min_score) break;
        if (!q.actions.count(c.subgoal.action)) continue;
        if (!q.anchors.empty() && !q.anchors.count(c.subgoal.anchor)) continue;
        Verdict v = validate(c.subgoal, scene, field, q.accepted, synonyms, vcfg);
        if (v) return {c.subgoal, c.score, std::move(v)};
    }
    throw Error(ErrorCode::NoValidSubgoal, "all subgoal candidates rejected");
}

inline SubgoalChoice next_subgoal(const SubgoalModel& model, const CoOccurrenceGraph& prior, const SubgoalQuery& q,
                                  const SceneGraph& scene, const SemanticGrid& grid, const Pose& pose,
                                  const SynonymTable& synonyms = {}, const FusionConfig& fusion = {},
                                  const ValidationConfig& vcfg = {}) {
    return next_subgoal(model, prior, q, scene, ReachabilityField(grid, pose.position, vcfg.reach), synonyms, fusion,
                        vcfg);
}

}  // namespace gridrelay
