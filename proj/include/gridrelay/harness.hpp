#pragma once
// harness.hpp - the episode loop, SR/SPL/SAE metrics, ablation variants,
// dataset splits, NDJSON traces and report writers.

#include <algorithm>
#include <deque>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "co_occurrence.hpp"
#include "control_reward.hpp"
#include "core.hpp"
#include "json.hpp"
#include "oracle_io.hpp"
#include "planner.hpp"
#include "recovery.hpp"
#include "scene_graph.hpp"
#include "semantic_grid.hpp"
#include "sim_env.hpp"
#include "subgoal.hpp"

namespace gridrelay {

enum class Variant { Full, NoCooccurrence, NoChaining, RandomAnchors, StaticGridOracle };
inline constexpr Variant kVariants[] = {Variant::Full, Variant::NoCooccurrence, Variant::NoChaining,
                                        Variant::RandomAnchors, Variant::StaticGridOracle};

inline std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::NoCooccurrence: return "no-cooccurrence";
        case Variant::NoChaining: return "no-chaining";
        case Variant::RandomAnchors: return "random-anchors";
        case Variant::StaticGridOracle: return "static-grid-oracle";
    }
    return "full";
}

inline Variant variant_from_string(std::string_view s) {
    for (Variant v : kVariants)
        if (to_string(v) == s) return v;
    throw Error(ErrorCode::InvalidParameter, "unknown variant " + std::string(s));
}

struct SeedRange {
    std::uint64_t first = 0, last = 0;  // inclusive
    std::size_t size() const { return last < first ? 0 : static_cast<std::size_t>(last - first + 1); }
    std::vector<std::uint64_t> seeds() const {
        std::vector<std::uint64_t> v;
        for (std::uint64_t s = first; s <= last && last >= first; ++s) v.push_back(s);
        return v;
    }
};

inline constexpr SeedRange kTrainSplit{0, 599};
inline constexpr SeedRange kValSplit{600, 759};
inline constexpr SeedRange kTestSplit{760, 999};

// "A..B" or a single seed.
inline SeedRange parse_seed_range(std::string_view s) {
    auto num = [](std::string_view t) {
        t = trim(t);
        if (t.empty() || t.find_first_not_of("0123456789") != std::string_view::npos)
            throw Error(ErrorCode::InvalidParameter, "bad seed " + std::string(t));
        return std::stoull(std::string(t));
    };
    const auto dots = s.find("..");
    if (dots == std::string_view::npos) {
        const auto v = num(s);
        return {v, v};
    }
    SeedRange r{num(s.substr(0, dots)), num(s.substr(dots + 2))};
    if (r.last < r.first) throw Error(ErrorCode::InvalidParameter, "empty seed range");
    return r;
}

// ---------------------------------------------------------------- training data

// Room-level category sets of every scenario in the range.
inline std::vector<CategorySet> build_corpus(const SeedRange& seeds, const SimConfig& sim = {},
                                             const Catalogue& cat = default_catalogue()) {
    std::vector<CategorySet> scenes;
    for (auto seed : seeds.seeds()) {
        const Scenario s = generate(seed, sim, cat);
        for (auto& r : s.room_scenes())
            if (!r.empty()) scenes.push_back(std::move(r));
    }
    return scenes;
}

inline std::vector<Demonstration> build_demonstrations(const SeedRange& seeds, const SimConfig& sim = {},
                                                       const RelayConfig& relay = {},
                                                       const Catalogue& cat = default_catalogue()) {
    std::vector<Demonstration> demos;
    for (auto seed : seeds.seeds()) {
        try {
            demos.push_back(expert_demonstration(generate(seed, sim, cat), relay, sim.sensor));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoDemo) throw;
        }
    }
    return demos;
}

// Learned components shared by every episode.
struct Knowledge {
    CoOccurrenceGraph prior;
    SubgoalModel model;
};

inline Knowledge fit_knowledge(const std::vector<CategorySet>& corpus, const std::vector<Demonstration>& demos,
                               const std::vector<std::string>& vocabulary, double smoothing = 0.1) {
    Knowledge k;
    k.prior = CoOccurrenceGraph::build_from_corpus(corpus);
    k.model = SubgoalModel::fit(demos, vocabulary, smoothing);
    return k;
}

inline Knowledge train_knowledge(const SimConfig& sim = {}, const SeedRange& seeds = kTrainSplit,
                                 const Catalogue& cat = default_catalogue(), double smoothing = 0.1) {
    return fit_knowledge(build_corpus(seeds, sim, cat), build_demonstrations(seeds, sim, {}, cat), cat.vocabulary(),
                         smoothing);
}

// ---------------------------------------------------------------- episode

struct EpisodeConfig {
    Variant variant = Variant::Full;
    SensorConfig sensor{};
    MatchConfig match{};
    EvidenceConfig evidence{1, 15};  // range returns are noise-free, one sighting suffices
    PlannerConfig planner{};
    RewardConfig reward{};
    FailureConfig failure{250, 3};
    RelayConfig relay{};
    FusionConfig fusion{};
    ValidationConfig validation{0.3, 1.0, ReachConfig{true, false}};  // same free-space assumption as the planner
    double min_relatedness = 0.3;  // prior weight to the goal below which an object is not worth a detour
    double anchor_radius = 1.0;      // m, arrival at a relay anchor
    double goal_stop_radius = 0.75;  // m from the estimated goal position; success is judged on ground truth
    int look_around_turns = 3;
    double search_radius = 1.75;     // m, a cell swept this close counts as searched for small objects
    double sweep_radius = 3.0;       // m, local search around a reached anchor
    double min_recovery_score = 0.1;  // FinalScore below which a recovered anchor is dropped
    // Exploration cost of a frontier: steps + frontier_weight * (1 - relevance), relevance being the
    // best fused score of grounded objects within frontier_context of it (frontier_neutral if none).
    double frontier_weight = 40.0;
    double frontier_context = 3.0;  // m
    double frontier_neutral = 0.5;
    // Every exploration goal is discounted by gain_weight times the number of unsearched,
    // not-known-occupied cells in the (2 * gain_window + 1)^2 box around it.
    double gain_weight = 0.2;
    int gain_window = 4;
    double failure_injection = 0.0;  // probability a targeted relay anchor is forced unreachable
    bool keep_trace = true;
};

struct FailureEvent {
    FailureKind kind = FailureKind::Timeout;
    int timestep = 0;
    std::string anchor;
    friend bool operator==(const FailureEvent&, const FailureEvent&) = default;
};

struct RecoveryEvent {
    int timestep = 0;
    FailureKind trigger = FailureKind::Timeout;
    std::string source;
    std::vector<std::string> proposed;  // raw oracle chain
    std::vector<std::string> accepted;  // after filtering, empty when exhausted
    bool exhausted = false;
};

struct EpisodeRecord {
    std::uint64_t seed = 0;
    std::string variant;
    std::string goal;
    bool success = false;
    double shortest = 0.0;  // l_i, m
    double traveled = 0.0;  // p_i, m
    int high_level_actions = 0;  // a_i
    int steps = 0;
    int collisions = 0;
    double final_distance = 0.0;  // m, Euclidean to the nearest goal instance
    std::vector<std::string> subgoals;  // accepted, in order
    std::vector<std::vector<std::string>> chains;  // relay chains adopted after recovery
    std::vector<FailureEvent> failures;
    std::vector<RecoveryEvent> recoveries;
    std::vector<RewardTerms> rewards;
    std::vector<std::string> trace;  // NDJSON lines
    std::uint64_t hash = 0;
};

namespace detail {

inline json pose_json(const Pose& p) { return json::array({p.position.x, p.position.y, p.heading}); }

inline json reward_json(const RewardTerms& r) {
    return {{"goal", r.goal}, {"progress", r.progress}, {"collision", r.collision}, {"drift", r.drift}, {"total", r.total}};
}

}  // namespace detail

inline json episode_summary_json(const EpisodeRecord& r) {
    return {{"type", "episode"},
            {"seed", r.seed},
            {"variant", r.variant},
            {"goal", r.goal},
            {"success", r.success},
            {"shortest", r.shortest},
            {"traveled", r.traveled},
            {"high_level_actions", r.high_level_actions},
            {"steps", r.steps},
            {"collisions", r.collisions},
            {"final_distance", r.final_distance},
            {"subgoals", r.subgoals},
            {"failures", r.failures.size()},
            {"recoveries", r.recoveries.size()}};
}

class Episode {
public:
    Episode(const Scenario& s, const Knowledge& k, const EpisodeConfig& cfg, RecoveryOracle& oracle)
        : s_(s), k_(k), cfg_(cfg), oracle_(oracle), synonyms_(s.synonyms), sensor_(s, cfg.sensor),
          noise_(make_stream(s.seed, Stream::SensorNoise)), embed_(make_stream(s.seed, Stream::Embedding)),
          random_(make_stream(s.seed, Stream::RandomAnchors)), inject_(make_stream(s.seed, Stream::FailureInjection)) {
        cfg_.reward.validate();
        cfg_.fusion.validate();
        prior_ = cfg.variant == Variant::NoCooccurrence ? k.prior.uniform() : k.prior;
        for (const auto* o : s.instances(s.goal)) goal_positions_.push_back(o->position.xy());
        goal_field_ = goal_distance_field(s, s.goal);
        const auto fused = fuse(k.model.distribution(s.goal, kStartContext), prior_row(prior_, s.vocabulary, s.goal), cfg.fusion);
        for (const auto& c : s.vocabulary) relevance_[c] = fused.count({Action::Goto, c}) ? fused.at({Action::Goto, c}) : 0.0;
        for (const auto& c : s.vocabulary)
            if (c != s.goal && prior_.weight(c, s.goal) >= cfg.min_relatedness) related_.insert(c);
        ctx_.pose = s.start;
        ctx_.grid = cfg.variant == Variant::StaticGridOracle ? ground_truth_grid(s)
                                                             : SemanticGrid(s.geometry, s.vocabulary, s.traversable, cfg.evidence);
        rec_.seed = s.seed;
        rec_.variant = std::string(to_string(cfg.variant));
        rec_.goal = s.goal;
        rec_.shortest = s.shortest_path;
    }

    EpisodeRecord run() {
        emit({{"schema", "TRACE v1"},
              {"seed", s_.seed},
              {"variant", rec_.variant},
              {"goal", s_.goal},
              {"shortest", s_.shortest_path},
              {"start", detail::pose_json(s_.start)}});
        sense();
        if (cfg_.variant != Variant::StaticGridOracle)
            for (int i = 0; i < cfg_.look_around_turns; ++i) queued_.push_back(Primitive::TurnLeft);
        while (!done_) {
            if (ctx_.step >= cfg_.failure.step_budget) {
                FailureSignals sig;
                sig.step = ctx_.step;
                on_failure(*detect_failure(sig, cfg_.failure));
                break;
            }
            const Primitive p = decide(0);
            execute(p);
        }
        rec_.steps = ctx_.step;
        rec_.final_distance = goal_euclid(ctx_.pose.position);
        const json summary = episode_summary_json(rec_);
        emit(summary);
        std::string all;
        for (const auto& l : rec_.trace) all += l + '\n';
        rec_.hash = fnv1a64(cfg_.keep_trace ? all : summary.dump());
        if (!cfg_.keep_trace) rec_.trace.clear();
        return rec_;
    }

private:
    struct Target {
        enum Kind { Anchor, Goal, Explore } kind = Explore;
        std::string anchor;
        Vec2 anchor_position{};
        Cell cell{};
        bool forced_unreachable = false;
        std::string node_id;  // scene node the anchor was grounded on
    };

    // ---- bookkeeping

    void emit(const json& j) { rec_.trace.push_back(j.dump()); }

    double geodesic(Vec2 p) const {
        const double d = goal_field_[s_.geometry.index(s_.geometry.cell_of(p))];
        return quantize_distance(d < 0 ? 0.0 : d);
    }

    double goal_euclid(Vec2 p) const {
        double best = std::numeric_limits<double>::infinity();
        for (const Vec2 g : goal_positions_) best = std::min(best, distance(p, g));
        return best;
    }

    Cell agent_cell() const { return s_.geometry.cell_of(ctx_.pose.position); }

    const ReachabilityField& field() {
        if (!field_) field_.emplace(ctx_.grid, ctx_.pose.position, cfg_.validation.reach);
        return *field_;
    }

    std::size_t grounded_label_count() const {
        std::set<std::string> labels;
        for (const auto& n : ctx_.scene.nodes())
            if (n.confidence >= cfg_.validation.min_confidence) labels.insert(n.label);
        return labels.size();
    }

    void accept(const Subgoal& sg, double score) {
        accepted_.push_back(sg);
        rec_.subgoals.push_back(to_string(sg));
        ++rec_.high_level_actions;
        emit({{"type", "subgoal"}, {"t", ctx_.step}, {"subgoal", to_string(sg)}, {"score", score}});
    }

    // ---- sensing and actuation

    void sense() {
        const Observation ob = sensor_.observe(ctx_.pose, noise_, embed_);
        const auto nodes = to_scene_nodes(ob);
        ctx_.scene = integrate_detections(std::move(ctx_.scene), nodes, cfg_.match);
        if (cfg_.variant != Variant::StaticGridOracle) {
            const auto dets = to_grid_detections(ob);
            SensorCone cone;
            cone.fov = cfg_.sensor.fov;
            cone.range = cfg_.sensor.range;
            ctx_.grid.update(ob.scan, dets, ctx_.pose, cone);
            const Cell here = agent_cell();
            if (!ctx_.grid.is_free(here)) ctx_.grid.set_cell(here, true, false);  // the agent stands here
        }
        mark_searched(ob);
        field_.reset();
    }

    void mark_searched(const Observation& ob) {
        const auto& g = s_.geometry;
        if (searched_.empty()) searched_.assign(g.size(), 0);
        for (std::size_t r = 0; r < ob.ray_angles.size(); ++r) {
            const double len = std::min(ob.ray_distances[r], cfg_.search_radius);
            const double a = ob.ray_angles[r];
            const Vec2 end{ctx_.pose.position.x + len * std::cos(a), ctx_.pose.position.y + len * std::sin(a)};
            traverse_segment(g, ctx_.pose.position, end, [&](Cell c) {
                if (!g.in_bounds(c)) return false;
                searched_[g.index(c)] = 1;
                return true;
            });
        }
    }

    void execute(Primitive p) {
        const Pose before = ctx_.pose;
        const double prev = geodesic(before.position);
        bool collided = false, reached = false;
        if (p == Primitive::Stop) {
            reached = goal_euclid(ctx_.pose.position) <= cfg_.reward.success_radius + 1e-9;
            rec_.success = reached;
            done_ = true;
        } else {
            const ActResult r = act(s_, ctx_.pose, p);
            collided = r.collided;
            if (collided) ++rec_.collisions;
            if (distance(r.pose.position, before.position) > 0) rec_.traveled += distance(r.pose.position, before.position);
            ctx_.pose = r.pose;
        }
        ++ctx_.step;
        if (p != Primitive::Stop && p != Primitive::Interact) sense();
        const double now = geodesic(ctx_.pose.position);

        std::vector<SeenObject> seen;
        for (const auto& n : ctx_.scene.nodes())
            if (n.label != s_.goal && k_.prior.weight(n.label, s_.goal) == 0.0)
                seen.push_back({n.label, n.position.xy(), true});
        const bool drift = is_drift(before, ctx_.pose, seen, prev, now);
        const RewardTerms rw = step_reward(prev, now, reached, collided, drift, cfg_.reward);
        rec_.rewards.push_back(rw);

        json line = {{"type", "step"},
                     {"t", ctx_.step},
                     {"action", to_string(p)},
                     {"pose", detail::pose_json(ctx_.pose)},
                     {"collided", collided},
                     {"dist", json::array({prev, now})},
                     {"reward", detail::reward_json(rw)},
                     {"target", target_ ? json(target_->kind == Target::Explore ? "explore" : target_->anchor) : json(nullptr)},
                     {"events", events_}};
        emit(line);
        events_ = json::array();
    }

    // ---- failures

    void on_failure(FailureReport r) {
        if (!r.anchor.empty() && r.kind != FailureKind::NoValidSubgoal &&
            std::find(ctx_.failed_anchors.begin(), ctx_.failed_anchors.end(), r.anchor) == ctx_.failed_anchors.end())
            ctx_.failed_anchors.push_back(r.anchor);
        if (!r.anchor.empty() && r.kind != FailureKind::NoValidSubgoal) excluded_.insert(r.anchor);
        r.visited = ctx_.visited;
        r.failed = ctx_.failed_anchors;
        std::set<std::string> cands;
        for (const auto& n : ctx_.scene.nodes())
            if (n.confidence >= cfg_.validation.min_confidence && n.label != s_.goal) cands.insert(n.label);
        r.candidates.assign(cands.begin(), cands.end());
        r.graph = ctx_.scene;
        rec_.failures.push_back({r.kind, r.timestep, r.anchor});
        emit({{"type", "failure"}, {"t", r.timestep}, {"kind", to_string(r.kind)}, {"anchor", r.anchor},
              {"diagnostics", r.diagnostics}});
        target_.reset();
        ctx_.target.reset();
        ctx_.planner.reset();
        ctx_.failures.push_back(r);
        if (r.kind == FailureKind::Timeout) {
            done_ = true;
            return;
        }
        recover(r);
    }

    void recover(const FailureReport& r) {
        RecoveryEvent ev;
        ev.timestep = r.timestep;
        ev.trigger = r.kind;
        try {
            RecoveryProposal p = oracle_.propose(r, prior_, s_.goal, cfg_.relay);
            ev.source = p.source;
            ev.proposed = p.chain;
            // an external oracle may ignore the exclusions; the loop enforces them
            std::erase_if(p.chain, [&](const std::string& a) { return excluded_.count(a) || visited(a) || a == s_.goal; });
            if (p.chain.empty()) throw Error(ErrorCode::RecoveryExhausted, "proposal only repeats excluded anchors");
            RecoveryProposal f = filter_proposal(p, ctx_.scene, field(), cfg_.validation);
            // drop anchors with no relevance to the goal, lead with the best FinalScore
            const auto ranked = fuse_relay_scores(prior_, s_.goal, p.scores, cfg_.relay.beta);
            std::map<std::string, double> final_score;
            for (const auto& sc : ranked) final_score[sc.category] = sc.score;
            std::erase_if(f.chain, [&](const std::string& a) { return final_score[a] < cfg_.min_recovery_score; });
            if (f.chain.empty()) throw Error(ErrorCode::RecoveryExhausted, "no proposed anchor is relevant to the goal");
            for (const auto& sc : ranked) {
                auto it = std::find(f.chain.begin(), f.chain.end(), sc.category);
                if (it == f.chain.end()) continue;
                std::rotate(f.chain.begin(), it, it + 1);
                break;
            }
            soft_reset(ctx_, f);
            ev.accepted = f.chain;
            rec_.chains.push_back(f.chain);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::RecoveryExhausted && e.code() != ErrorCode::NotFound) throw;
            ev.exhausted = true;
            if (ev.source.empty()) ev.source = oracle_.name();
        }
        emit({{"type", "recovery"}, {"t", r.timestep}, {"trigger", to_string(r.kind)}, {"source", ev.source},
              {"proposed", ev.proposed}, {"accepted", ev.accepted}, {"outcome", ev.exhausted ? "exhausted" : "accepted"}});
        rec_.recoveries.push_back(std::move(ev));
    }

    bool visited(const std::string& a) const {
        return std::find(ctx_.visited.begin(), ctx_.visited.end(), a) != ctx_.visited.end();
    }

    // ---- target selection

    bool set_anchor_target(const Subgoal& sg, const Verdict& v, double score) {
        Target t;
        t.kind = Target::Anchor;
        t.anchor = sg.anchor;
        t.anchor_position = v.anchor_position;
        t.node_id = v.node_id;
        const auto cell = field().nearest_within(v.anchor_position, cfg_.anchor_radius);
        if (!cell) return false;
        t.cell = *cell;
        accept(sg, score);
        targeted_.push_back(sg.anchor);
        if (cfg_.failure_injection > 0) t.forced_unreachable = inject_.bernoulli(cfg_.failure_injection);
        target_ = t;
        ctx_.target = sg.anchor;
        ctx_.planner.reset();
        FailureSignals sig;
        sig.step = ctx_.step;
        sig.targeted = targeted_;
        if (auto f = detect_failure(sig, cfg_.failure); f && f->kind == FailureKind::AnchorLoop) {
            on_failure(*f);
            return false;
        }
        return true;
    }

    bool goal_targeted() const { return target_ && target_->kind == Target::Goal; }

    // Returns true when the goal became (or already is) the target.
    bool try_goal() {
        if (goal_targeted()) return true;
        if (excluded_.count(s_.goal)) return false;
        if (cfg_.variant == Variant::StaticGridOracle) {
            std::optional<Cell> best;
            int best_d = 0;
            Vec2 pos{};
            for (const Vec2 g : goal_positions_) {
                const auto c = field().nearest_within(g, cfg_.goal_stop_radius);
                if (c && (!best || field().steps_to(*c) < best_d)) {
                    best = c;
                    best_d = field().steps_to(*c);
                    pos = g;
                }
            }
            if (!best) return false;
            accept({Action::Goto, s_.goal}, 1.0);
            target_ = Target{Target::Goal, s_.goal, pos, *best, false};
            ctx_.target = s_.goal;
            return true;
        }
        const Subgoal sg{Action::Goto, s_.goal};
        const Verdict v = validate(sg, ctx_.scene, field(), {}, synonyms_, cfg_.validation);
        if (!v) {
            if (v.reason == RejectReason::Feasibility) {
                FailureSignals sig;
                sig.step = ctx_.step;
                sig.no_path_anchor = s_.goal;
                on_failure(*detect_failure(sig, cfg_.failure));
            }
            return false;
        }
        const auto cell = field().nearest_within(v.anchor_position, cfg_.goal_stop_radius);
        if (!cell) return false;
        accept(sg, 1.0);
        target_ = Target{Target::Goal, s_.goal, v.anchor_position, *cell, false};
        ctx_.target = s_.goal;
        ctx_.planner.reset();
        queued_.clear();
        return true;
    }

    bool try_pending_chain() {
        while (!ctx_.chain.empty()) {
            const std::string a = ctx_.chain.front();
            ctx_.chain.pop_front();
            if (excluded_.count(a) || visited(a)) continue;
            const Subgoal sg{Action::Goto, a};
            const Verdict v = validate(sg, ctx_.scene, field(), accepted_, synonyms_, cfg_.validation);
            if (v && set_anchor_target(sg, v, 0.0)) return true;
        }
        return false;
    }

    // Picks the next relay anchor. Throws NoValidSubgoal when nothing qualifies.
    bool try_anchor() {
        if (cfg_.variant == Variant::RandomAnchors) {
            std::vector<std::pair<Subgoal, Verdict>> ok;
            for (const auto& c : s_.vocabulary) {
                if (c == s_.goal || excluded_.count(c)) continue;
                const Subgoal sg{Action::Goto, c};
                Verdict v = validate(sg, ctx_.scene, field(), accepted_, synonyms_, cfg_.validation);
                if (v) ok.emplace_back(sg, std::move(v));
            }
            if (ok.empty()) throw Error(ErrorCode::NoValidSubgoal, "no grounded candidate");
            const auto& [sg, v] = ok[random_.uniform_int(0, static_cast<int>(ok.size()) - 1)];
            return set_anchor_target(sg, v, 0.0);
        }
        SubgoalQuery q;
        q.goal = s_.goal;
        q.context = context_;
        q.accepted = accepted_;
        q.anchors = related_;
        if (related_.empty()) throw Error(ErrorCode::NoValidSubgoal, "no related category");
        q.actions = {Action::Goto};
        for (const auto& a : excluded_) q.accepted.push_back({Action::Goto, a});
        const SubgoalChoice ch =
            next_subgoal(k_.model, prior_, q, ctx_.scene, field(), synonyms_, cfg_.fusion, cfg_.validation);
        if (ch.subgoal.anchor == s_.goal) return try_goal();
        return set_anchor_target(ch.subgoal, ch.verdict, ch.score);
    }

    // Exploration goals: known free cells not yet swept at short range.
    bool is_frontier(Cell c) const { return ctx_.grid.is_free(c) && !searched_[s_.geometry.index(c)]; }

    bool try_explore(bool local_only = false) {
        const ReachabilityField f(ctx_.grid, ctx_.pose.position, ReachConfig{});
        const auto& g = s_.geometry;
        std::vector<std::pair<Vec2, double>> context;
        if (semantic_frontiers())
            for (const auto& n : ctx_.scene.nodes())
                if (n.confidence >= cfg_.validation.min_confidence) context.emplace_back(n.position.xy(), relevance_.at(n.label));
        // summed-area table of open, unsearched cells
        const int W = g.cols + 1;
        std::vector<int> open((g.rows + 1) * W, 0);
        for (int r = 0; r < g.rows; ++r)
            for (int c = 0; c < g.cols; ++c) {
                const Cell x{r, c};
                const int v = !searched_[g.index(x)] && !ctx_.grid.is_obstacle(x);
                open[(r + 1) * W + c + 1] = v + open[r * W + c + 1] + open[(r + 1) * W + c] - open[r * W + c];
            }
        auto gain = [&](Cell c) {
            const int h = cfg_.gain_window;
            const int r0 = std::max(0, c.row - h), r1 = std::min(g.rows, c.row + h + 1);
            const int c0 = std::max(0, c.col - h), c1 = std::min(g.cols, c.col + h + 1);
            return open[r1 * W + c1] - open[r0 * W + c1] - open[r1 * W + c0] + open[r0 * W + c0];
        };
        auto cost = [&](Cell c, int d) {
            const double base = d - cfg_.gain_weight * gain(c);
            if (!semantic_frontiers()) return base;
            double rel = -1.0;
            const Vec2 p = g.cell_center(c);
            for (const auto& [q, r] : context)
                if (r > rel && distance(p, q) <= cfg_.frontier_context) rel = r;
            if (rel < 0) rel = cfg_.frontier_neutral;
            return base + cfg_.frontier_weight * (1.0 - std::min(1.0, rel));
        };
        auto nearest = [&](bool local) {
            std::optional<Cell> best;
            double best_cost = 0;
            for (std::size_t i = 0; i < g.size(); ++i) {
                const Cell c = g.cell_at(i);
                const int d = f.steps_to(c);
                if (d <= 0 || bad_frontiers_.count(c) || !is_frontier(c)) continue;
                if (local && distance(g.cell_center(c), *sweep_center_) > cfg_.sweep_radius) continue;
                const double k = local ? d : cost(c, d);
                if (best && k >= best_cost) continue;
                best = c;
                best_cost = k;
            }
            return best;
        };
        std::optional<Cell> best;
        if (sweep_center_) {
            best = nearest(true);
            if (!best) sweep_center_.reset();
        }
        if (!best && !local_only) best = nearest(false);
        if (!best) return false;
        target_ = Target{Target::Explore, "", g.cell_center(*best), *best, false};
        ctx_.target.reset();
        ctx_.planner.reset();
        return true;
    }

    void choose_target() {
        if (try_goal()) return;
        if (target_) return;  // a failure above may have adopted a recovery chain
        if (cfg_.variant == Variant::StaticGridOracle || cfg_.variant == Variant::NoChaining) {
            try_explore();
            return;
        }
        if (sweep_center_ && try_explore(true)) return;
        if (try_pending_chain()) return;
        try {
            if (try_anchor()) return;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoValidSubgoal) throw;
            if (just_arrived_) {
                just_arrived_ = false;
                FailureSignals sig;
                sig.step = ctx_.step;
                sig.no_valid_subgoal = true;
                sig.last_anchor = context_;
                on_failure(*detect_failure(sig, cfg_.failure));
                if (try_pending_chain()) return;
            }
        }
        if (!target_) try_explore();
    }

    bool semantic_frontiers() const {
        return cfg_.variant == Variant::Full || cfg_.variant == Variant::NoCooccurrence;
    }

    // ---- control

    Primitive decide(int depth) {
        if (depth > 8) return Primitive::Stop;
        if (cfg_.variant != Variant::StaticGridOracle) try_goal();
        if (done_) return Primitive::Stop;
        if (!queued_.empty() && !goal_targeted()) {
            const Primitive p = queued_.front();
            queued_.pop_front();
            return p;
        }
        // new objects while exploring justify a detour
        if (target_ && target_->kind == Target::Explore && !sweep_center_ && cfg_.variant != Variant::NoChaining &&
            cfg_.variant != Variant::StaticGridOracle) {
            const std::size_t n = grounded_label_count();
            if (n != known_labels_) {
                known_labels_ = n;
                const auto keep = target_;
                target_.reset();
                bool ok = false;
                try {
                    ok = try_pending_chain() || try_anchor();
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::NoValidSubgoal) throw;
                }
                if (!ok && !target_) target_ = keep;
            }
        }
        if (!target_) {
            choose_target();
            if (done_) return Primitive::Stop;
            if (!target_) {
                if (!queued_.empty()) return decide(depth + 1);
                return Primitive::Stop;  // nothing left to explore
            }
        }
        return navigate(depth);
    }

    Primitive navigate(int depth) {
        Target& t = *target_;
        const Cell here = agent_cell();
        if (t.kind == Target::Goal) {
            if (cfg_.variant != Variant::StaticGridOracle)
                if (const auto* n = ctx_.scene.best_with_label(s_.goal)) t.anchor_position = n->position.xy();
            if (distance(ctx_.pose.position, t.anchor_position) <= cfg_.goal_stop_radius + 1e-9) {
                accept({Action::Interact, s_.goal}, 1.0);
                return Primitive::Stop;
            }
        } else if (t.kind == Target::Anchor) {
            if (distance(ctx_.pose.position, t.anchor_position) <= cfg_.anchor_radius + 1e-9 && !t.forced_unreachable) {
                ctx_.visited.push_back(t.anchor);
                context_ = t.anchor;
                just_arrived_ = true;
                events_.push_back("arrived:" + t.anchor);
                sweep_center_ = t.anchor_position;
                target_.reset();
                ctx_.target.reset();
                ctx_.planner.reset();
                for (int i = 0; i < cfg_.look_around_turns; ++i) queued_.push_back(Primitive::TurnLeft);
                return decide(depth + 1);
            }
        } else if (here == t.cell || !is_frontier(t.cell)) {
            target_.reset();
            ctx_.planner.reset();
            return decide(depth + 1);
        }

        if (t.forced_unreachable) return unreachable(depth);

        CostMap map = CostMap::from_grid(ctx_.grid, cfg_.planner);
        map.set_penalty(here, 0);
        if (t.kind != Target::Explore) {
            if (t.kind == Target::Anchor)
                if (const auto* n = ctx_.scene.find(t.node_id)) t.anchor_position = n->position.xy();
            const double radius = t.kind == Target::Goal ? cfg_.goal_stop_radius : cfg_.anchor_radius;
            if (!map.passable(t.cell) || distance(s_.geometry.cell_center(t.cell), t.anchor_position) > radius + 1e-9) {
                // the approach cell is blocked or the estimate moved away from it
                const ReachabilityField opt(ctx_.grid, ctx_.pose.position, cfg_.planner.reach());
                const auto c = opt.nearest_within(t.anchor_position, radius);
                if (!c) return unreachable(depth);
                t.cell = *c;
                ctx_.planner.reset();
                events_.push_back(to_string(ReplanCause::AnchorUpdate));
            }
        } else if (!map.passable(t.cell)) {
            return unreachable(depth);
        }
        if (last_path_) {
            if (auto ev = check_replan(*last_path_, ctx_.grid, ctx_.pose, ctx_.step, cfg_.planner.reach()))
                events_.push_back(to_string(ev->cause));
        }
        if (!ctx_.planner || ctx_.planner->goal() != t.cell) {
            ctx_.planner.emplace(map, here, t.cell);
        } else {
            ctx_.planner->move_start(here);
            ctx_.planner->sync(map);
        }
        if (!ctx_.planner->has_path()) return unreachable(depth);
        last_path_ = ctx_.planner->extract();
        const Primitive p = follow_path(*last_path_, ctx_.pose, s_.geometry, 0.0);
        if (p == Primitive::Stop) {
            // at the approach cell but outside the arrival radius (estimate moved)
            if (t.kind == Target::Explore) {
                target_.reset();
                return decide(depth + 1);
            }
            return unreachable(depth);
        }
        return p;
    }

    Primitive unreachable(int depth) {
        events_.push_back(to_string(ReplanCause::AnchorUnreachable));
        last_path_.reset();
        if (target_->kind == Target::Explore) {
            bad_frontiers_.insert(target_->cell);
            target_.reset();
            ctx_.planner.reset();
            return decide(depth + 1);
        }
        FailureSignals sig;
        sig.step = ctx_.step;
        sig.no_path_anchor = target_->anchor;
        on_failure(*detect_failure(sig, cfg_.failure));
        if (done_) return Primitive::Stop;
        return decide(depth + 1);
    }

    const Scenario& s_;
    const Knowledge& k_;
    EpisodeConfig cfg_;
    RecoveryOracle& oracle_;
    CoOccurrenceGraph prior_;
    SynonymTable synonyms_;
    Sensor sensor_;
    Rng noise_, embed_, random_, inject_;
    std::vector<Vec2> goal_positions_;
    std::vector<double> goal_field_;
    std::map<std::string, double> relevance_;  // fused goto score per category at episode start
    std::set<std::string> related_;
    NavigationContext ctx_;
    std::optional<ReachabilityField> field_;
    std::optional<Target> target_;
    std::optional<Path> last_path_;
    std::deque<Primitive> queued_;
    std::vector<Subgoal> accepted_;
    std::vector<std::string> targeted_;
    std::set<std::string> excluded_;
    std::set<Cell> bad_frontiers_;
    std::vector<char> searched_;
    std::optional<Vec2> sweep_center_;  // active local search around the last reached anchor
    std::string context_ = kStartContext;
    std::size_t known_labels_ = 0;
    bool just_arrived_ = false;
    bool done_ = false;
    json events_ = json::array();
    EpisodeRecord rec_;
};

inline EpisodeRecord run_episode(const Scenario& s, const Knowledge& k, const EpisodeConfig& cfg,
                                 RecoveryOracle* oracle = nullptr) {
    RuleOracle rule;
    return Episode(s, k, cfg, oracle ? *oracle : rule).run();
}

// ---------------------------------------------------------------- metrics

enum class Regime { All, LongHorizon };

inline std::string_view to_string(Regime r) { return r == Regime::All ? "ALL" : "L>=5"; }

struct RegimeStats {
    std::size_t episodes = 0;
    double sr = 0.0, spl = 0.0, sae = 0.0;  // percentages
};

inline bool in_regime(const EpisodeRecord& r, Regime g, double step) {
    return g == Regime::All || r.shortest > 5.0 * step;
}

inline double spl_term(const EpisodeRecord& r) {
    return r.success ? r.shortest / std::max(r.traveled, r.shortest) : 0.0;
}

inline double sae_term(const EpisodeRecord& r, double step) {
    return r.success ? r.shortest / std::max(r.high_level_actions * step, r.shortest) : 0.0;
}

inline RegimeStats metrics(const std::vector<EpisodeRecord>& records, Regime regime, double step = 0.25) {
    if (!(step > 0)) throw Error(ErrorCode::InvalidParameter, "step length");
    RegimeStats out;
    double sr = 0, spl = 0, sae = 0;
    for (const auto& r : records) {
        if (!in_regime(r, regime, step)) continue;
        if (!(r.shortest > 0)) throw Error(ErrorCode::DegenerateEpisode, "episode with zero shortest path");
        ++out.episodes;
        sr += r.success ? 1.0 : 0.0;
        spl += spl_term(r);
        sae += sae_term(r, step);
    }
    if (out.episodes > 0) {
        const double n = static_cast<double>(out.episodes);
        out.sr = 100.0 * sr / n;
        out.spl = 100.0 * spl / n;
        out.sae = 100.0 * sae / n;
    }
    return out;
}

struct BenchmarkReport {
    std::string variant;
    RegimeStats all, long_horizon;
    std::map<std::string, RegimeStats> per_object;  // ALL regime per goal category
};

inline BenchmarkReport make_report(const std::string& variant, std::vector<EpisodeRecord> records, double step = 0.25) {
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.seed < b.seed; });
    BenchmarkReport rep;
    rep.variant = variant;
    rep.all = metrics(records, Regime::All, step);
    rep.long_horizon = metrics(records, Regime::LongHorizon, step);
    std::map<std::string, std::vector<EpisodeRecord>> by_goal;
    for (const auto& r : records) by_goal[r.goal].push_back(r);
    for (const auto& [g, rs] : by_goal) rep.per_object[g] = metrics(rs, Regime::All, step);
    return rep;
}

inline json report_json(const BenchmarkReport& r) {
    auto stats = [](const RegimeStats& s) {
        return json{{"SR", s.sr}, {"SPL", s.spl}, {"SAE", s.sae}, {"episodes", s.episodes}};
    };
    json per = json::object();
    for (const auto& [g, s] : r.per_object) per[g] = stats(s);
    return {{"variant", r.variant},
            {"regimes", {{std::string(to_string(Regime::All)), stats(r.all)},
                         {std::string(to_string(Regime::LongHorizon)), stats(r.long_horizon)}}},
            {"per_object", per}};
}

inline void write_reports_csv(std::ostream& os, const std::vector<BenchmarkReport>& reports) {
    os << "variant,regime,SR,SPL,SAE,episodes\n";
    char buf[256];
    for (const auto& r : reports)
        for (Regime g : {Regime::All, Regime::LongHorizon}) {
            const RegimeStats& s = g == Regime::All ? r.all : r.long_horizon;
            std::snprintf(buf, sizeof buf, "%s,%s,%.4f,%.4f,%.4f,%zu\n", r.variant.c_str(),
                          std::string(to_string(g)).c_str(), s.sr, s.spl, s.sae, s.episodes);
            os << buf;
        }
}

inline void write_reports_json(std::ostream& os, const std::vector<BenchmarkReport>& reports) {
    json arr = json::array();
    for (const auto& r : reports) arr.push_back(report_json(r));
    os << arr.dump(2) << '\n';
}

// ---------------------------------------------------------------- traces

inline void write_trace(std::ostream& os, const EpisodeRecord& r) {
    for (const auto& l : r.trace) os << l << '\n';
}

// Rebuilds the metric-relevant fields of a record from its trace.
inline EpisodeRecord read_trace(std::istream& is) {
    std::string line;
    bool header = false;
    std::optional<EpisodeRecord> out;
    std::string all;
    while (std::getline(is, line)) {
        if (trim(line).empty()) continue;
        all += line + '\n';
        const json j = json::parse(line);
        if (!header) {
            if (j.value("schema", "") != "TRACE v1") throw Error(ErrorCode::InvalidInput, "not a TRACE v1 stream");
            header = true;
            continue;
        }
        const std::string type = j.value("type", "");
        if (type == "episode") {
            EpisodeRecord r;
            r.seed = j.at("seed").get<std::uint64_t>();
            r.variant = j.at("variant").get<std::string>();
            r.goal = j.at("goal").get<std::string>();
            r.success = j.at("success").get<bool>();
            r.shortest = j.at("shortest").get<double>();
            r.traveled = j.at("traveled").get<double>();
            r.high_level_actions = j.at("high_level_actions").get<int>();
            r.steps = j.at("steps").get<int>();
            r.collisions = j.at("collisions").get<int>();
            r.final_distance = j.at("final_distance").get<double>();
            r.subgoals = j.at("subgoals").get<std::vector<std::string>>();
            out = std::move(r);
        }
    }
    if (!header || !out) throw Error(ErrorCode::InvalidInput, "trace lacks header or episode summary");
    out->hash = fnv1a64(all);
    return *out;
}

inline std::string trace_filename(Variant v, std::uint64_t seed) {
    return std::string(to_string(v)) + "_" + std::to_string(seed) + ".ndjson";
}

// ---------------------------------------------------------------- ablation

struct AblationResult {
    std::vector<BenchmarkReport> reports;
    std::map<std::string, std::vector<EpisodeRecord>> records;  // by variant, sorted by seed
};

inline AblationResult run_ablation(const std::vector<std::uint64_t>& seeds, const std::vector<Variant>& variants,
                                   const Knowledge& k, const EpisodeConfig& base = {}, const SimConfig& sim = {},
                                   const Catalogue& cat = default_catalogue(), RecoveryOracle* oracle = nullptr) {
    std::vector<std::uint64_t> sorted = seeds;
    std::sort(sorted.begin(), sorted.end());
    std::vector<Scenario> scenarios;
    for (auto s : sorted) scenarios.push_back(generate(s, sim, cat));
    AblationResult out;
    for (Variant v : variants) {
        EpisodeConfig cfg = base;
        cfg.variant = v;
        auto& recs = out.records[std::string(to_string(v))];
        for (const auto& s : scenarios) recs.push_back(run_episode(s, k, cfg, oracle));
        out.reports.push_back(make_report(std::string(to_string(v)), recs, sim.step));
    }
    return out;
}

}  // namespace gridrelay
