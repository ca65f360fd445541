#pragma once
// co_occurrence.hpp - category co-occurrence knowledge graph: corpus counting,
// modularity clustering, relay-chain optimization and oracle score fusion.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "core.hpp"

namespace gridrelay {

using CategorySet = std::set<std::string>;

class CoOccurrenceGraph {
public:
    CoOccurrenceGraph() = default;

    static CoOccurrenceGraph build_from_corpus(const std::vector<CategorySet>& scenes) {
        CategorySet all;
        for (const auto& s : scenes) all.insert(s.begin(), s.end());
        CoOccurrenceGraph g;
        g.categories_.assign(all.begin(), all.end());
        const std::size_t n = g.categories_.size();
        g.co_freq_.assign(n * n, 0);
        for (const auto& s : scenes) {
            std::vector<std::size_t> idx;
            for (const auto& c : s) idx.push_back(*g.index_of(c));
            for (std::size_t a = 0; a < idx.size(); ++a)
                for (std::size_t b = a + 1; b < idx.size(); ++b) {
                    ++g.co_freq_[idx[a] * n + idx[b]];
                    ++g.co_freq_[idx[b] * n + idx[a]];
                }
        }
        const std::int64_t mx = g.co_freq_.empty() ? 0 : *std::max_element(g.co_freq_.begin(), g.co_freq_.end());
        g.weights_.assign(n * n, 0.0);
        if (mx > 0)
            for (std::size_t i = 0; i < n * n; ++i)
                g.weights_[i] = static_cast<double>(g.co_freq_[i]) / static_cast<double>(mx);
        return g;
    }

    // Direct construction from a symmetric weight matrix (row-major). Counts are left empty.
    static CoOccurrenceGraph from_weights(std::vector<std::string> categories, std::vector<double> weights) {
        const std::size_t n = categories.size();
        if (weights.size() != n * n) throw Error(ErrorCode::InvalidInput, "weight matrix shape");
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return categories[a] < categories[b]; });
        CoOccurrenceGraph g;
        g.weights_.assign(n * n, 0.0);
        g.co_freq_.assign(n * n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            g.categories_.push_back(categories[order[i]]);
            for (std::size_t j = 0; j < n; ++j) {
                const double w = weights[order[i] * n + order[j]];
                if (w < 0 || w > 1) throw Error(ErrorCode::InvalidInput, "weights must lie in [0,1]");
                if (w != weights[order[j] * n + order[i]]) throw Error(ErrorCode::InvalidInput, "asymmetric weights");
                g.weights_[i * n + j] = i == j ? 0.0 : w;
            }
        }
        return g;
    }

    // Every off-diagonal pair gets weight 1: a prior that carries no information.
    CoOccurrenceGraph uniform() const {
        CoOccurrenceGraph g = *this;
        const std::size_t n = size();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) g.weights_[i * n + j] = i == j ? 0.0 : 1.0;
        return g;
    }

    std::size_t size() const { return categories_.size(); }
    const std::vector<std::string>& categories() const { return categories_; }

    std::optional<std::size_t> index_of(std::string_view c) const {
        auto it = std::lower_bound(categories_.begin(), categories_.end(), c);
        if (it == categories_.end() || *it != c) return std::nullopt;
        return static_cast<std::size_t>(it - categories_.begin());
    }

    double weight(std::size_t i, std::size_t j) const { return weights_[i * size() + j]; }
    std::int64_t co_freq(std::size_t i, std::size_t j) const { return co_freq_[i * size() + j]; }

    // Unknown categories have zero affinity to everything.
    double weight(std::string_view a, std::string_view b) const {
        auto i = index_of(a), j = index_of(b);
        return (i && j) ? weight(*i, *j) : 0.0;
    }

    const std::vector<double>& weight_matrix() const { return weights_; }

    double degree(std::size_t i) const {
        double d = 0.0;
        for (std::size_t j = 0; j < size(); ++j) d += weight(i, j);
        return d;
    }

    double total_weight() const {
        double s = 0.0;
        for (double w : weights_) s += w;
        return 0.5 * s;
    }

    // Adjacency list, one line per category, weights to 6 decimals.
    void write_adjacency(std::ostream& os) const {
        for (std::size_t i = 0; i < size(); ++i) {
            os << categories_[i] << ':';
            bool first = true;
            for (std::size_t j = 0; j < size(); ++j) {
                if (weight(i, j) <= 0) continue;
                char buf[64];
                std::snprintf(buf, sizeof buf, "%.6f", weight(i, j));
                os << (first ? " " : ", ") << categories_[j] << ' ' << buf;
                first = false;
            }
            os << '\n';
        }
    }

private:
    std::vector<std::string> categories_;  // sorted
    std::vector<std::int64_t> co_freq_;
    std::vector<double> weights_;
};

// ---------------------------------------------------------------- corpus I/O

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

// One scene per line, comma-separated category names. Blank lines are skipped.
inline std::vector<CategorySet> read_corpus(std::istream& is) {
    std::vector<CategorySet> scenes;
    std::string line;
    while (std::getline(is, line)) {
        if (trim(line).empty()) continue;
        CategorySet s;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (auto t = trim(tok); !t.empty()) s.insert(t);
        scenes.push_back(std::move(s));
    }
    return scenes;
}

inline void write_corpus(std::ostream& os, const std::vector<CategorySet>& scenes) {
    for (const auto& s : scenes) {
        bool first = true;
        for (const auto& c : s) {
            os << (first ? "" : ",") << c;
            first = false;
        }
        os << '\n';
    }
}

// ---------------------------------------------------------------- modularity

struct ClusteringResult {
    std::map<std::string, int> assignment;
    double modularity = 0.0;
    double total_weight = 0.0;
    std::vector<double> degrees;
};

// Q = 1/2m sum_ij (w_ij - d_i d_j / 2m) delta(c_i, c_j), assignment indexed like categories().
inline double modularity(const CoOccurrenceGraph& g, const std::vector<int>& assignment) {
    const std::size_t n = g.size();
    if (assignment.size() != n) throw Error(ErrorCode::InvalidInput, "assignment size");
    const double m = g.total_weight();
    if (!(m > 0)) throw Error(ErrorCode::UndefinedModularity, "graph has no weight");
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = g.degree(i);
    const double two_m = 2.0 * m;
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (assignment[i] == assignment[j]) q += g.weight(i, j) - d[i] * d[j] / two_m;
    return q / two_m;
}

inline double modularity(const CoOccurrenceGraph& g, const std::map<std::string, int>& assignment) {
    std::vector<int> a(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto it = assignment.find(g.categories()[i]);
        if (it == assignment.end()) throw Error(ErrorCode::InvalidInput, "unassigned category " + g.categories()[i]);
        a[i] = it->second;
    }
    return modularity(g, a);
}

// Greedy agglomerative maximization: from singletons, apply the single best
// positive-gain merge until none remains. Gain of merging a and b is
// W_ab / m - D_a D_b / (2 m^2).
inline ClusteringResult cluster(const CoOccurrenceGraph& g) {
    const std::size_t n = g.size();
    const double m = g.total_weight();
    if (!(m > 0)) throw Error(ErrorCode::UndefinedModularity, "graph has no weight");

    std::vector<std::vector<std::size_t>> members(n);
    std::vector<double> deg(n);
    std::vector<double> between(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        members[i] = {i};
        deg[i] = g.degree(i);
        for (std::size_t j = 0; j < n; ++j) between[i * n + j] = g.weight(i, j);
    }
    std::vector<char> alive(n, 1);
    constexpr double min_gain = 1e-12;
    while (true) {
        double best = min_gain;
        std::optional<std::pair<std::size_t, std::size_t>> pick;
        for (std::size_t a = 0; a < n; ++a) {
            if (!alive[a]) continue;
            for (std::size_t b = a + 1; b < n; ++b) {
                if (!alive[b]) continue;
                const double gain = between[a * n + b] / m - deg[a] * deg[b] / (2.0 * m * m);
                if (gain > best) {
                    best = gain;
                    pick = {a, b};
                }
            }
        }
        if (!pick) break;
        const auto [a, b] = *pick;
        members[a].insert(members[a].end(), members[b].begin(), members[b].end());
        members[b].clear();
        alive[b] = 0;
        deg[a] += deg[b];
        for (std::size_t k = 0; k < n; ++k) {
            if (k == a) continue;
            between[a * n + k] += between[b * n + k];
            between[k * n + a] = between[a * n + k];
        }
    }

    // Cluster ids in order of each cluster's first category.
    std::vector<int> assign(n, -1);
    int next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (assign[i] >= 0) continue;
        for (std::size_t c = 0; c < n; ++c)
            if (alive[c] && std::find(members[c].begin(), members[c].end(), i) != members[c].end()) {
                for (auto v : members[c]) assign[v] = next;
                break;
            }
        ++next;
    }

    ClusteringResult r;
    for (std::size_t i = 0; i < n; ++i) {
        r.assignment[g.categories()[i]] = assign[i];
        r.degrees.push_back(g.degree(i));
    }
    r.total_weight = m;
    r.modularity = modularity(g, assign);
    return r;
}

// ---------------------------------------------------------------- relay chains

struct RelayConfig {
    int max_hops = 3;
    double beta = 0.5;
    int beam_width = 32;
    int exact_limit = 20;  // |V| up to which the search is exact

    void validate() const {
        if (max_hops < 0) throw Error(ErrorCode::InvalidParameter, "max_hops");
        if (!(beta >= 0 && beta <= 1)) throw Error(ErrorCode::InvalidParameter, "beta");
        if (beam_width < 1) throw Error(ErrorCode::InvalidParameter, "beam_width");
    }
};

struct RelayChain {
    std::string start;  // empty when the search had no start category
    std::string goal;
    std::vector<std::string> anchors;
    double chain_sum = 0.0;
    double mean_weight = 0.0;
};

// Sum of consecutive weights from start through anchors to goal, left to right.
// A missing start contributes zero on its edge.
inline double relay_chain_sum(const CoOccurrenceGraph& g, std::optional<std::size_t> start,
                              const std::vector<std::size_t>& anchors, std::size_t goal) {
    double s = 0.0;
    std::optional<std::size_t> prev = start;
    for (auto a : anchors) {
        s += prev ? g.weight(*prev, a) : 0.0;
        prev = a;
    }
    s += prev ? g.weight(*prev, goal) : 0.0;
    return s;
}

struct RelaySearch {
    std::optional<std::size_t> start;
    std::size_t goal = 0;
    std::vector<char> allowed;  // intermediate candidates; empty means all
    int min_hops = 0;
};

namespace detail {

struct Partial {
    double sum = 0.0;  // prefix sum through the last anchor
    std::vector<std::size_t> seq;
};

inline bool better_partial(const Partial& a, const Partial& b) {
    if (a.sum != b.sum) return a.sum > b.sum;
    return a.seq < b.seq;
}

// Best complete chain for every exact hop count 1..max_hops, via DP over
// (visited set, last anchor). Entries keep the lexicographically smallest
// prefix among equal sums, which preserves the global tie rule since all
// compared prefixes share length and last element.
inline std::vector<std::optional<Partial>> exact_layers(const CoOccurrenceGraph& g, const RelaySearch& q,
                                                        const std::vector<std::size_t>& cand, int max_hops) {
    const std::size_t k = cand.size();
    std::vector<std::optional<Partial>> best(max_hops + 1);
    using Layer = std::unordered_map<std::uint32_t, std::vector<std::optional<Partial>>>;
    Layer layer;
    for (std::size_t i = 0; i < k; ++i) {
        auto& slot = layer[1u << i];
        slot.resize(k);
        slot[i] = Partial{q.start ? g.weight(*q.start, cand[i]) : 0.0, {cand[i]}};
    }
    for (int hops = 1; hops <= max_hops && !layer.empty(); ++hops) {
        for (const auto& [mask, row] : layer)
            for (std::size_t last = 0; last < k; ++last) {
                if (!row[last]) continue;
                Partial full = *row[last];
                full.sum += g.weight(cand[last], q.goal);
                if (!best[hops] || better_partial(full, *best[hops])) best[hops] = std::move(full);
            }
        if (hops == max_hops) break;
        Layer next;
        for (const auto& [mask, row] : layer)
            for (std::size_t last = 0; last < k; ++last) {
                if (!row[last]) continue;
                for (std::size_t nx = 0; nx < k; ++nx) {
                    if (mask & (1u << nx)) continue;
                    Partial p{row[last]->sum + g.weight(cand[last], cand[nx]), row[last]->seq};
                    p.seq.push_back(cand[nx]);
                    auto& slot = next[mask | (1u << nx)];
                    if (slot.empty()) slot.resize(k);
                    if (!slot[nx] || better_partial(p, *slot[nx])) slot[nx] = std::move(p);
                }
            }
        layer = std::move(next);
    }
    return best;
}

// Beam search over (hop count, last anchor) keeping `width` best prefixes per hop.
inline std::vector<std::optional<Partial>> beam_layers(const CoOccurrenceGraph& g, const RelaySearch& q,
                                                       const std::vector<std::size_t>& cand, int max_hops,
                                                       int width) {
    std::vector<std::optional<Partial>> best(max_hops + 1);
    std::vector<Partial> beam;
    for (auto c : cand) beam.push_back({q.start ? g.weight(*q.start, c) : 0.0, {c}});
    for (int hops = 1; hops <= max_hops && !beam.empty(); ++hops) {
        std::sort(beam.begin(), beam.end(), better_partial);
        if (beam.size() > static_cast<std::size_t>(width)) beam.resize(width);
        for (const auto& p : beam) {
            Partial full = p;
            full.sum += g.weight(p.seq.back(), q.goal);
            if (!best[hops] || better_partial(full, *best[hops])) best[hops] = std::move(full);
        }
        if (hops == max_hops) break;
        std::vector<Partial> next;
        for (const auto& p : beam)
            for (auto c : cand) {
                if (std::find(p.seq.begin(), p.seq.end(), c) != p.seq.end()) continue;
                Partial e{p.sum + g.weight(p.seq.back(), c), p.seq};
                e.seq.push_back(c);
                next.push_back(std::move(e));
            }
        beam = std::move(next);
    }
    return best;
}

}  // namespace detail

// Best chain across hop counts by mean weight chain_sum / (hops + 1); ties
// prefer fewer hops, then lexicographic anchor order. Without a start category
// the chain has one edge less and is averaged over `hops` edges.
inline RelayChain best_relay_chain(const CoOccurrenceGraph& g, const RelaySearch& q, const RelayConfig& cfg) {
    cfg.validate();
    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (i == q.goal || (q.start && i == *q.start)) continue;
        if (!q.allowed.empty() && !q.allowed[i]) continue;
        cand.push_back(i);
    }
    const int max_hops = std::min<int>(cfg.max_hops, static_cast<int>(cand.size()));
    const std::size_t effective_v = cand.size() + 2;

    std::vector<std::optional<detail::Partial>> layers;
    if (max_hops >= 1) {
        if (effective_v <= static_cast<std::size_t>(cfg.exact_limit))
            layers = detail::exact_layers(g, q, cand, max_hops);
        else
            layers = detail::beam_layers(g, q, cand, max_hops, cfg.beam_width);
    }

    std::optional<detail::Partial> pick;
    int pick_hops = -1;
    double pick_mean = -1.0;
    if (q.min_hops <= 0) {
        pick = detail::Partial{q.start ? g.weight(*q.start, q.goal) : 0.0, {}};
        pick_hops = 0;
        pick_mean = pick->sum;
    }
    for (int h = std::max(1, q.min_hops); h <= max_hops; ++h) {
        if (!layers[h]) continue;
        const double mean = layers[h]->sum / (q.start ? h + 1 : h);
        if (mean > pick_mean) {  // equal means keep the shorter chain
            pick = layers[h];
            pick_hops = h;
            pick_mean = mean;
        }
    }
    if (!pick) throw Error(ErrorCode::NotFound, "no relay chain satisfies the hop constraint");

    RelayChain r;
    r.start = q.start ? g.categories()[*q.start] : std::string{};
    r.goal = g.categories()[q.goal];
    for (auto a : pick->seq) r.anchors.push_back(g.categories()[a]);
    r.chain_sum = pick->sum;
    r.mean_weight = pick_mean;
    return r;
}

inline RelayChain best_relay_chain(const CoOccurrenceGraph& g, std::string_view start, std::string_view goal,
                                   const RelayConfig& cfg) {
    auto s = g.index_of(start), t = g.index_of(goal);
    if (!s) throw Error(ErrorCode::NotFound, "unknown category " + std::string(start));
    if (!t) throw Error(ErrorCode::NotFound, "unknown category " + std::string(goal));
    if (*s == *t) throw Error(ErrorCode::InvalidInput, "start equals goal");
    return best_relay_chain(g, RelaySearch{s, *t, {}, 0}, cfg);
}

struct ScoredCategory {
    std::string category;
    double score = 0.0;
};

// FinalScore(o) = beta * oracle(o) + (1 - beta) * w(o, goal); missing oracle scores count as 0.
inline std::vector<ScoredCategory> fuse_relay_scores(const CoOccurrenceGraph& g, std::string_view goal,
                                                     const std::map<std::string, double>& oracle_scores,
                                                     double beta) {
    if (!(beta >= 0 && beta <= 1)) throw Error(ErrorCode::InvalidParameter, "beta");
    CategorySet cats(g.categories().begin(), g.categories().end());
    for (const auto& [c, s] : oracle_scores) cats.insert(c);
    cats.erase(std::string(goal));
    std::vector<ScoredCategory> out;
    for (const auto& c : cats) {
        auto it = oracle_scores.find(c);
        const double llm = it == oracle_scores.end() ? 0.0 : it->second;
        out.push_back({c, beta * llm + (1.0 - beta) * g.weight(c, goal)});
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
    return out;
}

}  // namespace gridrelay
