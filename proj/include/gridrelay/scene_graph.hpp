#pragma once
// scene_graph.hpp - dynamic open-vocabulary scene graph: incremental matching of
// streamed detections, spatial affinity edges, and language grounding queries.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"

namespace gridrelay {

enum class Relation { OnTopOf, NextTo, Inside, Near };

inline std::string_view to_string(Relation r) {
    switch (r) {
        case Relation::OnTopOf: return "on-top-of";
        case Relation::NextTo: return "next-to";
        case Relation::Inside: return "inside";
        case Relation::Near: return "near";
    }
    return "near";
}

inline std::optional<Relation> relation_from_string(std::string_view s) {
    if (s == "on-top-of") return Relation::OnTopOf;
    if (s == "next-to") return Relation::NextTo;
    if (s == "inside") return Relation::Inside;
    if (s == "near") return Relation::Near;
    return std::nullopt;
}

struct Box3 {
    Vec3 lo{}, hi{};
    bool contains(const Vec3& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
    }
    bool contains(const Box3& b) const { return contains(b.lo) && contains(b.hi); }
    Vec3 half_extent() const { return 0.5 * (hi - lo); }
    static Box3 centered(const Vec3& c, const Vec3& half) { return {c - half, c + half}; }
};

using Embedding = std::vector<double>;

inline constexpr std::size_t kEmbeddingDim = 16;

inline double dot(const Embedding& a, const Embedding& b) {
    if (a.size() != b.size()) throw Error(ErrorCode::InvalidInput, "embedding dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline void normalize(Embedding& e) {
    double n = 0.0;
    for (double v : e) n += v * v;
    n = std::sqrt(n);
    if (n == 0.0) throw Error(ErrorCode::InvalidInput, "zero embedding");
    for (double& v : e) v /= n;
}

// Deterministic unit vector for a label: the "text side" of the open-vocabulary
// embedding space. Sensor embeddings are this plus noise.
inline Embedding label_embedding(std::string_view label, std::size_t dim = kEmbeddingDim) {
    Rng rng(fnv1a64(label));
    Embedding e(dim);
    for (double& v : e) v = rng.normal();
    normalize(e);
    return e;
}

struct SceneNode {
    std::string id;  // assigned by the graph
    std::string label;
    Embedding embedding;
    Vec3 position{};
    Box3 bbox{};
    double confidence = 1.0;
    int last_seen = 0;
    double facing = 0.0;  // radians
};

struct SceneEdge {
    std::string src, dst;
    Relation relation = Relation::Near;
    double affinity = 0.0;
};

struct MatchConfig {
    double lambda_match = 0.6;
    double epsilon_pos = 0.25;  // m
    double sigma = 1.0;         // m
    double decay_gamma = 0.98;
    double prune_tau = 0.05;
    double match_threshold = 0.5;
    double ema_keep = 0.7;

    void validate() const {
        if (!(lambda_match >= 0 && lambda_match <= 1)) throw Error(ErrorCode::InvalidParameter, "lambda_match");
        if (!(epsilon_pos > 0)) throw Error(ErrorCode::InvalidParameter, "epsilon_pos");
        if (!(sigma > 0)) throw Error(ErrorCode::InvalidParameter, "sigma");
        if (!(decay_gamma > 0 && decay_gamma <= 1)) throw Error(ErrorCode::InvalidParameter, "decay_gamma");
        if (!(prune_tau >= 0 && prune_tau < 1)) throw Error(ErrorCode::InvalidParameter, "prune_tau");
    }
};

// rho = exp(-|pi - pj|^2 / sigma^2) * max(0, cos theta)
inline double spatial_affinity(const Vec3& pi, const Vec3& pj, double theta, double sigma) {
    if (!(sigma > 0)) throw Error(ErrorCode::InvalidParameter, "sigma must be positive");
    const Vec3 d = pi - pj;
    const double d2 = d.x * d.x + d.y * d.y + d.z * d.z;
    return std::exp(-d2 / (sigma * sigma)) * std::max(0.0, std::cos(theta));
}

inline double node_similarity(const SceneNode& prev, const SceneNode& cand, const MatchConfig& cfg) {
    const double feat = dot(prev.embedding, cand.embedding);
    const double close = distance(prev.position, cand.position) < cfg.epsilon_pos ? 1.0 : 0.0;
    return cfg.lambda_match * feat + (1.0 - cfg.lambda_match) * close;
}

class SceneGraph {
public:
    const std::vector<SceneNode>& nodes() const { return nodes_; }
    const std::vector<SceneEdge>& edges() const { return edges_; }
    int timestep() const { return timestep_; }
    bool empty() const { return nodes_.empty(); }

    const SceneNode* find(std::string_view id) const {
        auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id,
                                   [](const SceneNode& n, std::string_view key) { return n.id < key; });
        return (it != nodes_.end() && it->id == id) ? &*it : nullptr;
    }

    // Highest-confidence node with this exact label, ties by id.
    const SceneNode* best_with_label(std::string_view label) const {
        const SceneNode* best = nullptr;
        for (const auto& n : nodes_)
            if (n.label == label && (!best || n.confidence > best->confidence)) best = &n;
        return best;
    }

    // Inserts a node and returns its id. An empty id is replaced by a fresh one.
    std::string add_node(SceneNode n) {
        if (n.id.empty()) n.id = fresh_id();
        if (find(n.id)) throw Error(ErrorCode::InvalidInput, "duplicate node id " + n.id);
        if (!(n.confidence >= 0 && n.confidence <= 1)) throw Error(ErrorCode::InvalidInput, "confidence");
        auto it = std::lower_bound(nodes_.begin(), nodes_.end(), n.id,
                                   [](const SceneNode& a, const std::string& key) { return a.id < key; });
        std::string id = n.id;
        nodes_.insert(it, std::move(n));
        return id;
    }

    void add_edge(SceneEdge e) {
        if (e.src == e.dst) throw Error(ErrorCode::InvalidInput, "self edge");
        if (!find(e.src) || !find(e.dst)) throw Error(ErrorCode::InvalidInput, "edge endpoint missing");
        if (!(e.affinity >= 0 && e.affinity <= 1)) throw Error(ErrorCode::InvalidInput, "affinity");
        for (const auto& x : edges_)
            if (x.src == e.src && x.dst == e.dst && x.relation == e.relation)
                throw Error(ErrorCode::InvalidInput, "duplicate edge");
        edges_.push_back(std::move(e));
    }

    void set_timestep(int t) { timestep_ = t; }

    void scale_confidences(double factor) {
        for (auto& n : nodes_) n.confidence = std::clamp(n.confidence * factor, 0.0, 1.0);
    }

    friend SceneGraph integrate_detections(SceneGraph graph, std::span<const SceneNode> detections,
                                           const MatchConfig& cfg);

private:
    std::string fresh_id() {
        char buf[16];
        std::snprintf(buf, sizeof buf, "n%06d", next_id_++);
        return buf;
    }

    std::vector<SceneNode> nodes_;  // sorted by id
    std::vector<SceneEdge> edges_;
    int timestep_ = 0;
    int next_id_ = 0;
};

// Relation of i with respect to j, from geometry alone.
inline Relation infer_relation(const SceneNode& i, const SceneNode& j, double sigma) {
    if (j.bbox.contains(i.bbox) && !i.bbox.contains(j.bbox)) return Relation::Inside;
    const Vec3 hj = j.bbox.half_extent();
    const double planar = distance(i.position.xy(), j.position.xy());
    if (planar <= std::max(hj.x, hj.y) && i.position.z > j.bbox.hi.z - 1e-9) return Relation::OnTopOf;
    return distance(i.position, j.position) <= sigma ? Relation::NextTo : Relation::Near;
}

// One incremental update step. Detections are matched greedily in order of
// descending similarity (one-to-one, same label, similarity >= threshold).
inline SceneGraph integrate_detections(SceneGraph graph, std::span<const SceneNode> detections,
                                       const MatchConfig& cfg) {
    cfg.validate();
    const int t = graph.timestep_ + 1;
    graph.timestep_ = t;
    auto& nodes = graph.nodes_;

    struct Candidate {
        double sim;
        std::size_t det;
        std::size_t node;
    };
    std::vector<Candidate> cands;
    for (std::size_t d = 0; d < detections.size(); ++d)
        for (std::size_t n = 0; n < nodes.size(); ++n) {
            if (nodes[n].label != detections[d].label) continue;
            const double s = node_similarity(nodes[n], detections[d], cfg);
            if (s >= cfg.match_threshold) cands.push_back({s, d, n});
        }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        if (a.sim != b.sim) return a.sim > b.sim;
        if (a.det != b.det) return a.det < b.det;
        return a.node < b.node;
    });

    std::vector<char> node_matched(nodes.size(), 0);
    std::vector<std::optional<std::size_t>> det_to_node(detections.size());
    for (const auto& c : cands) {
        if (node_matched[c.node] || det_to_node[c.det]) continue;
        node_matched[c.node] = 1;
        det_to_node[c.det] = c.node;
    }

    const double keep = cfg.ema_keep, take = 1.0 - cfg.ema_keep;
    for (std::size_t n = 0; n < nodes.size(); ++n)
        if (!node_matched[n]) nodes[n].confidence *= cfg.decay_gamma;

    std::vector<SceneNode> fresh;
    for (std::size_t d = 0; d < detections.size(); ++d) {
        const SceneNode& det = detections[d];
        if (det_to_node[d]) {
            SceneNode& n = nodes[*det_to_node[d]];
            n.position = keep * n.position + take * det.position;
            for (std::size_t k = 0; k < n.embedding.size(); ++k)
                n.embedding[k] = keep * n.embedding[k] + take * det.embedding[k];
            normalize(n.embedding);
            const Vec3 half = keep * n.bbox.half_extent() + take * det.bbox.half_extent();
            n.bbox = Box3::centered(n.position, half);
            n.confidence = std::clamp(det.confidence, 0.0, 1.0);
            n.last_seen = t;
            n.facing = det.facing;
        } else {
            SceneNode n = det;
            n.id.clear();
            n.last_seen = t;
            n.confidence = std::clamp(det.confidence, 0.0, 1.0);
            if (!n.bbox.contains(n.position)) n.bbox = Box3::centered(n.position, n.bbox.half_extent());
            fresh.push_back(std::move(n));
        }
    }

    std::erase_if(nodes, [&](const SceneNode& n) { return n.confidence < cfg.prune_tau; });
    for (auto& n : fresh) graph.add_node(std::move(n));

    // Affinity edges are a pure function of the surviving nodes.
    graph.edges_.clear();
    for (const auto& a : nodes)
        for (const auto& b : nodes) {
            if (a.id == b.id) continue;
            if (distance(a.position, b.position) >= 2.0 * cfg.sigma) continue;
            const double rho = spatial_affinity(a.position, b.position, angle_between(a.facing, b.facing), cfg.sigma);
            graph.edges_.push_back({a.id, b.id, infer_relation(a, b, cfg.sigma), rho});
        }
    return graph;
}

struct GroundingQuery {
    std::vector<std::string> tokens;
    std::string target_label;
    std::optional<Relation> relation;
};

struct GroundingResult {
    std::string node_id;
    double score = 0.0;
};

// Score(v) = alpha * Sim(q, l_v) + (1 - alpha) * max over matching incoming edges of rho.
inline GroundingResult ground_query(const SceneGraph& graph, const GroundingQuery& query, double alpha) {
    if (graph.empty()) throw Error(ErrorCode::NotFound, "empty scene graph");
    if (!(alpha >= 0 && alpha <= 1)) throw Error(ErrorCode::InvalidParameter, "alpha");
    const std::size_t dim = graph.nodes().front().embedding.size();
    const Embedding q = label_embedding(query.target_label, dim);

    std::map<std::string, double> relation_term;
    if (query.relation)
        for (const auto& e : graph.edges())
            if (e.relation == *query.relation) {
                double& v = relation_term[e.dst];
                v = std::max(v, e.affinity);
            }

    const SceneNode* best = nullptr;
    double best_score = -1.0;
    for (const auto& n : graph.nodes()) {
        const double sim = n.label == query.target_label ? 1.0 : std::clamp(dot(q, n.embedding), 0.0, 1.0);
        auto it = relation_term.find(n.id);
        const double rel = it == relation_term.end() ? 0.0 : it->second;
        const double score = alpha * sim + (1.0 - alpha) * rel;
        // nodes are id-sorted, so strict comparisons keep the lexicographic tie rule
        if (!best || score > best_score || (score == best_score && n.confidence > best->confidence)) {
            best = &n;
            best_score = score;
        }
    }
    return {best->id, best_score};
}

}  // namespace gridrelay
