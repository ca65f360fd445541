#pragma once
// Independent reference implementations used only by tests.

#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <vector>

#include "gridrelay/co_occurrence.hpp"
#include "gridrelay/planner.hpp"

namespace oracle {

using namespace gridrelay;

// Plain uniform-cost search over the same edge model as the planner.
inline Cost dijkstra(const CostMap& map, Cell s, Cell t) {
    if (!map.passable(s) || !map.passable(t)) return kInfCost;
    std::vector<Cost> d(map.size(), kInfCost);
    using E = std::pair<Cost, std::size_t>;
    std::priority_queue<E, std::vector<E>, std::greater<>> pq;
    d[map.index(s)] = 0;
    pq.emplace(0, map.index(s));
    while (!pq.empty()) {
        auto [du, ui] = pq.top();
        pq.pop();
        if (du != d[ui]) continue;
        const Cell u = map.cell_at(ui);
        if (u == t) return du;
        for (int k = 0; k < map.neighbor_count(); ++k) {
            const Cost w = map.edge_cost(u, k);
            if (w >= kInfCost) continue;
            const std::size_t vi = map.index({u.row + kDir8[k][0], u.col + kDir8[k][1]});
            if (du + w < d[vi]) {
                d[vi] = du + w;
                pq.emplace(d[vi], vi);
            }
        }
    }
    return kInfCost;
}

struct ChainPick {
    std::vector<std::size_t> anchors;
    double sum = 0.0;
    double mean = 0.0;
};

// Enumerates every simple chain start -> anchors -> goal with up to max_hops anchors.
inline ChainPick brute_relay(const CoOccurrenceGraph& g, std::size_t s, std::size_t t, int max_hops) {
    ChainPick best{{}, g.weight(s, t), g.weight(s, t)};
    std::vector<std::size_t> cur;
    std::vector<char> used(g.size(), 0);
    used[s] = used[t] = 1;
    std::function<void()> rec = [&] {
        if (!cur.empty()) {
            double sum = 0.0;
            std::size_t prev = s;
            for (auto a : cur) {
                sum += g.weight(prev, a);
                prev = a;
            }
            sum += g.weight(prev, t);
            const double mean = sum / static_cast<double>(cur.size() + 1);
            const bool better = mean > best.mean ||
                                (mean == best.mean && (cur.size() < best.anchors.size() ||
                                                       (cur.size() == best.anchors.size() && cur < best.anchors)));
            if (better) best = {cur, sum, mean};
        }
        if (static_cast<int>(cur.size()) == max_hops) return;
        for (std::size_t v = 0; v < g.size(); ++v) {
            if (used[v]) continue;
            used[v] = 1;
            cur.push_back(v);
            rec();
            cur.pop_back();
            used[v] = 0;
        }
    };
    rec();
    return best;
}

// Chains of 1..max_hops anchors drawn from `allowed` with no start category:
// mean over the h edges anchor -> ... -> goal.
inline ChainPick brute_relay_virtual(const CoOccurrenceGraph& g, std::size_t t, const std::vector<char>& allowed,
                                     int max_hops) {
    std::optional<ChainPick> best;
    std::vector<std::size_t> cur;
    std::vector<char> used(g.size(), 0);
    used[t] = 1;
    std::function<void()> rec = [&] {
        if (!cur.empty()) {
            double sum = 0.0;
            for (std::size_t i = 1; i < cur.size(); ++i) sum += g.weight(cur[i - 1], cur[i]);
            sum += g.weight(cur.back(), t);
            const double mean = sum / static_cast<double>(cur.size());
            const bool better = !best || mean > best->mean ||
                                (mean == best->mean && (cur.size() < best->anchors.size() ||
                                                        (cur.size() == best->anchors.size() && cur < best->anchors)));
            if (better) best = ChainPick{cur, sum, mean};
        }
        if (static_cast<int>(cur.size()) == max_hops) return;
        for (std::size_t v = 0; v < g.size(); ++v) {
            if (used[v] || !allowed[v]) continue;
            used[v] = 1;
            cur.push_back(v);
            rec();
            cur.pop_back();
            used[v] = 0;
        }
    };
    rec();
    return best.value_or(ChainPick{});
}

// Maximum modularity over all set partitions (restricted growth strings).
inline double best_partition_q(const CoOccurrenceGraph& g) {
    const std::size_t n = g.size();
    std::vector<int> a(n, 0);
    double best = -std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, int)> rec = [&](std::size_t i, int used) {
        if (i == n) {
            best = std::max(best, modularity(g, a));
            return;
        }
        for (int c = 0; c <= used; ++c) {
            a[i] = c;
            rec(i + 1, std::max(used, c + 1));
        }
    };
    rec(0, 0);
    return best;
}

}  // namespace oracle
