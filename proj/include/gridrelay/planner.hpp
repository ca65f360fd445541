#pragma once
// planner.hpp - grid path planning over a semantic grid: A* with fully specified
// tie-breaking, incremental D* Lite repair, and replanning triggers.
//
// Costs are fixed-point integers (1000 units per straight step) so that the
// incremental and from-scratch planners agree exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <tuple>
#include <vector>

#include "core.hpp"
#include "raster.hpp"
#include "semantic_grid.hpp"

namespace gridrelay {

using Cost = std::int64_t;
inline constexpr Cost kStepCost = 1000;
inline constexpr Cost kDiagCost = 1414;  // sqrt(2) to three decimals
inline constexpr Cost kInfCost = std::numeric_limits<Cost>::max() / 4;

inline Cost cost_add(Cost a, Cost b) { return (a >= kInfCost || b >= kInfCost) ? kInfCost : a + b; }

struct PlannerConfig {
    bool eight_connected = false;
    double clearance_weight = 0.2;  // extra step cost for cells next to obstacles
    bool unknown_passable = true;

    Cost clearance_units() const { return static_cast<Cost>(std::llround(clearance_weight * kStepCost)); }
    ReachConfig reach() const { return {unknown_passable, eight_connected}; }
};

// Per-cell traversal cost snapshot. A blocked cell has no incident edges.
class CostMap {
public:
    CostMap() = default;
    CostMap(int rows, int cols, bool eight_connected = false)
        : rows_(rows), cols_(cols), eight_(eight_connected),
          penalty_(static_cast<std::size_t>(rows) * cols, 0) {}

    static CostMap from_grid(const SemanticGrid& g, const PlannerConfig& cfg) {
        CostMap m(g.rows(), g.cols(), cfg.eight_connected);
        const Cost pen = cfg.clearance_units();
        const ReachConfig rc = cfg.reach();
        for (int r = 0; r < g.rows(); ++r)
            for (int c = 0; c < g.cols(); ++c) {
                if (!g.passable({r, c}, rc)) {
                    m.penalty_[m.index({r, c})] = kInfCost;
                    continue;
                }
                bool near = false;
                for (const auto& d : kDir8) {
                    const Cell n{r + d[0], c + d[1]};
                    if (g.in_bounds(n) && g.is_obstacle(n)) near = true;
                }
                m.penalty_[m.index({r, c})] = near ? pen : 0;
            }
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool eight_connected() const { return eight_; }
    bool in_bounds(Cell c) const { return c.row >= 0 && c.col >= 0 && c.row < rows_ && c.col < cols_; }
    std::size_t index(Cell c) const { return static_cast<std::size_t>(c.row) * cols_ + c.col; }
    Cell cell_at(std::size_t i) const { return {static_cast<int>(i / cols_), static_cast<int>(i % cols_)}; }
    std::size_t size() const { return penalty_.size(); }

    bool passable(Cell c) const { return in_bounds(c) && penalty_[index(c)] < kInfCost; }
    Cost penalty(Cell c) const { return penalty_[index(c)]; }
    void set_blocked(Cell c) { penalty_[index(c)] = kInfCost; }
    void set_penalty(Cell c, Cost p) { penalty_[index(c)] = p; }

    int neighbor_count() const { return eight_ ? 8 : 4; }

    // Cost of moving u -> v for neighbor direction k, kInfCost if not allowed.
    Cost edge_cost(Cell u, int k) const {
        const Cell v{u.row + kDir8[k][0], u.col + kDir8[k][1]};
        if (!passable(u) || !passable(v)) return kInfCost;
        if (k >= 4) {
            if (!passable({u.row + kDir8[k][0], u.col}) || !passable({u.row, u.col + kDir8[k][1]})) return kInfCost;
            return kDiagCost + penalty(v);
        }
        return kStepCost + penalty(v);
    }

    Cost heuristic(Cell a, Cell b) const {
        const Cost dr = std::abs(a.row - b.row), dc = std::abs(a.col - b.col);
        if (!eight_) return kStepCost * (dr + dc);
        const Cost lo = std::min(dr, dc), hi = std::max(dr, dc);
        return kStepCost * (hi - lo) + kDiagCost * lo;
    }

    // Cells whose passability or penalty differ from `other` (same shape).
    std::vector<Cell> diff(const CostMap& other) const {
        std::vector<Cell> out;
        for (std::size_t i = 0; i < penalty_.size(); ++i)
            if (penalty_[i] != other.penalty_[i]) out.push_back(cell_at(i));
        return out;
    }

    friend bool operator==(const CostMap&, const CostMap&) = default;

private:
    int rows_ = 0, cols_ = 0;
    bool eight_ = false;
    std::vector<Cost> penalty_;
};

struct Path {
    std::vector<Cell> cells;
    Cost cost_units = 0;
    double cost() const { return static_cast<double>(cost_units) / kStepCost; }
    bool empty() const { return cells.empty(); }
};

// Recomputes a path's cost from the map; kInfCost if any move is invalid.
inline Cost path_cost(const CostMap& map, const std::vector<Cell>& cells) {
    Cost total = 0;
    for (std::size_t i = 1; i < cells.size(); ++i) {
        const int dr = cells[i].row - cells[i - 1].row, dc = cells[i].col - cells[i - 1].col;
        int k = -1;
        for (int d = 0; d < map.neighbor_count(); ++d)
            if (kDir8[d][0] == dr && kDir8[d][1] == dc) k = d;
        if (k < 0) return kInfCost;
        total = cost_add(total, map.edge_cost(cells[i - 1], k));
    }
    return total;
}

// Optimal path; open-list order is (f, h, row, col).
inline Path astar(const CostMap& map, Cell start, Cell goal) {
    if (!map.in_bounds(start) || !map.in_bounds(goal)) throw Error(ErrorCode::OutOfBounds, "astar endpoint");
    if (!map.passable(start)) throw Error(ErrorCode::InvalidInput, "start cell is not free");
    if (!map.passable(goal)) throw Error(ErrorCode::NoPath, "goal cell is not free");
    using Entry = std::tuple<Cost, Cost, int, int>;  // f, h, row, col
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    std::vector<Cost> g(map.size(), kInfCost);
    std::vector<std::int32_t> parent(map.size(), -1);
    std::vector<char> closed(map.size(), 0);
    g[map.index(start)] = 0;
    open.emplace(map.heuristic(start, goal), map.heuristic(start, goal), start.row, start.col);
    while (!open.empty()) {
        const auto [f, h, r, c] = open.top();
        open.pop();
        const Cell u{r, c};
        const std::size_t ui = map.index(u);
        if (closed[ui]) continue;
        closed[ui] = 1;
        if (u == goal) break;
        for (int k = 0; k < map.neighbor_count(); ++k) {
            const Cost w = map.edge_cost(u, k);
            if (w >= kInfCost) continue;
            const Cell v{u.row + kDir8[k][0], u.col + kDir8[k][1]};
            const std::size_t vi = map.index(v);
            if (closed[vi]) continue;
            const Cost ng = g[ui] + w;
            if (ng < g[vi]) {
                g[vi] = ng;
                parent[vi] = static_cast<std::int32_t>(ui);
                const Cost hv = map.heuristic(v, goal);
                open.emplace(ng + hv, hv, v.row, v.col);
            }
        }
    }
    const std::size_t gi = map.index(goal);
    if (g[gi] >= kInfCost) throw Error(ErrorCode::NoPath, "goal unreachable");
    Path p;
    p.cost_units = g[gi];
    for (std::int64_t i = static_cast<std::int64_t>(gi); i >= 0; i = parent[i]) p.cells.push_back(map.cell_at(i));
    std::reverse(p.cells.begin(), p.cells.end());
    return p;
}

// Incremental D* Lite (goal-rooted). Holds its own cost snapshot; callers
// report changed cells, or hand over a fresh map and let `sync` diff it.
class DStarLite {
public:
    DStarLite(const CostMap& map, Cell start, Cell goal)
        : map_(map), start_(start), last_(start), goal_(goal),
          g_(map.size(), kInfCost), rhs_(map.size(), kInfCost), open_key_(map.size()) {
        if (!map_.in_bounds(start) || !map_.in_bounds(goal)) throw Error(ErrorCode::OutOfBounds, "dstar endpoint");
        if (!map_.passable(start)) throw Error(ErrorCode::InvalidInput, "start cell is not free");
        rhs_[map_.index(goal_)] = map_.passable(goal_) ? 0 : kInfCost;
        if (map_.passable(goal_)) insert(goal_, key(goal_));
        compute();
    }

    Cell start() const { return start_; }
    Cell goal() const { return goal_; }
    const CostMap& map() const { return map_; }
    std::uint64_t expansions() const { return expansions_; }

    void move_start(Cell s) {
        if (s == start_) return;
        km_ = cost_add(km_, map_.heuristic(last_, s));
        last_ = s;
        start_ = s;
    }

    // Applies new per-cell costs for `changed` taken from `fresh`.
    void update(const CostMap& fresh, std::span<const Cell> changed) {
        for (const Cell c : changed) {
            if (!map_.in_bounds(c)) continue;
            if (fresh.passable(c)) map_.set_penalty(c, fresh.penalty(c));
            else map_.set_blocked(c);
        }
        for (const Cell c : changed) {
            if (!map_.in_bounds(c)) continue;
            update_vertex(c);
            for (const auto& d : kDir8) {
                const Cell n{c.row + d[0], c.col + d[1]};
                if (map_.in_bounds(n)) update_vertex(n);
            }
        }
        compute();
    }

    void sync(const CostMap& fresh) {
        const auto changed = fresh.diff(map_);
        if (!changed.empty()) update(fresh, changed);
    }

    bool has_path() const { return g_[map_.index(start_)] < kInfCost; }

    Path extract() const {
        if (!has_path()) throw Error(ErrorCode::NoPath, "goal unreachable");
        Path p;
        p.cells.push_back(start_);
        Cell u = start_;
        const std::size_t limit = map_.size();
        while (u != goal_) {
            Cost best = kInfCost;
            std::optional<Cell> next;
            int next_k = -1;
            for (int k = 0; k < map_.neighbor_count(); ++k) {
                const Cost w = map_.edge_cost(u, k);
                if (w >= kInfCost) continue;
                const Cell v{u.row + kDir8[k][0], u.col + kDir8[k][1]};
                const Cost total = cost_add(w, g_[map_.index(v)]);
                if (total < best || (total == best && next && v < *next)) {
                    best = total;
                    next = v;
                    next_k = k;
                }
            }
            if (!next || p.cells.size() > limit) throw Error(ErrorCode::NoPath, "path extraction failed");
            p.cost_units += map_.edge_cost(u, next_k);
            u = *next;
            p.cells.push_back(u);
        }
        return p;
    }

private:
    using Key = std::pair<Cost, Cost>;
    struct Entry {
        Key k;
        std::int32_t idx;
        bool operator>(const Entry& o) const { return std::tie(k, idx) > std::tie(o.k, o.idx); }
    };

    Key key(Cell u) const {
        const std::size_t i = map_.index(u);
        const Cost m = std::min(g_[i], rhs_[i]);
        return {cost_add(cost_add(m, map_.heuristic(start_, u)), km_), m};
    }

    void insert(Cell u, Key k) {
        const std::size_t i = map_.index(u);
        open_key_[i] = k;
        open_.push({k, static_cast<std::int32_t>(i)});
    }

    void update_vertex(Cell u) {
        const std::size_t i = map_.index(u);
        if (u != goal_) {
            Cost best = kInfCost;
            for (int k = 0; k < map_.neighbor_count(); ++k) {
                const Cost w = map_.edge_cost(u, k);
                if (w >= kInfCost) continue;
                const Cell v{u.row + kDir8[k][0], u.col + kDir8[k][1]};
                best = std::min(best, cost_add(w, g_[map_.index(v)]));
            }
            rhs_[i] = best;
        } else {
            rhs_[i] = map_.passable(goal_) ? 0 : kInfCost;
        }
        open_key_[i].reset();
        if (g_[i] != rhs_[i]) insert(u, key(u));
    }

    void pop_stale() {
        while (!open_.empty()) {
            const Entry& e = open_.top();
            if (open_key_[e.idx] && *open_key_[e.idx] == e.k) return;
            open_.pop();
        }
    }

    void compute() {
        const std::size_t si = map_.index(start_);
        while (true) {
            pop_stale();
            if (open_.empty()) break;
            const Entry top = open_.top();
            if (!(top.k < key(start_) || rhs_[si] != g_[si])) break;
            ++expansions_;
            const Cell u = map_.cell_at(top.idx);
            const Key fresh = key(u);
            if (top.k < fresh) {
                open_.pop();
                insert(u, fresh);
            } else if (g_[top.idx] > rhs_[top.idx]) {
                open_.pop();
                open_key_[top.idx].reset();
                g_[top.idx] = rhs_[top.idx];
                for_neighbors(u, [&](Cell n) { update_vertex(n); });
            } else {
                g_[top.idx] = kInfCost;
                update_vertex(u);
                for_neighbors(u, [&](Cell n) { update_vertex(n); });
            }
        }
    }

    template <class F>
    void for_neighbors(Cell u, F&& f) const {
        for (int k = 0; k < map_.neighbor_count(); ++k) {
            const Cell v{u.row + kDir8[k][0], u.col + kDir8[k][1]};
            if (map_.in_bounds(v)) f(v);
        }
    }

    CostMap map_;
    Cell start_, last_, goal_;
    Cost km_ = 0;
    std::vector<Cost> g_, rhs_;
    std::vector<std::optional<Key>> open_key_;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open_;
    std::uint64_t expansions_ = 0;
};

enum class ReplanCause { NewObstacle, PathDeviation, AnchorUpdate, AnchorUnreachable };

inline std::string_view to_string(ReplanCause c) {
    switch (c) {
        case ReplanCause::NewObstacle: return "new-obstacle";
        case ReplanCause::PathDeviation: return "path-deviation";
        case ReplanCause::AnchorUpdate: return "anchor-update";
        case ReplanCause::AnchorUnreachable: return "anchor-unreachable";
    }
    return "new-obstacle";
}

struct ReplanEvent {
    ReplanCause cause = ReplanCause::NewObstacle;
    int timestep = 0;
};

inline int chebyshev(Cell a, Cell b) { return std::max(std::abs(a.row - b.row), std::abs(a.col - b.col)); }

// new-obstacle if a remaining path cell is no longer passable, path-deviation
// if the agent is more than `max_deviation` cells from every path cell.
inline std::optional<ReplanEvent> check_replan(const Path& path, const SemanticGrid& grid, const Pose& pose,
                                               int timestep = 0, const ReachConfig& rc = {},
                                               int max_deviation = 1) {
    if (path.empty()) return std::nullopt;
    const Cell agent = grid.geometry().cell_of(pose.position);
    std::size_t nearest = 0;
    int nearest_d = std::numeric_limits<int>::max();
    for (std::size_t i = 0; i < path.cells.size(); ++i) {
        const int d = chebyshev(agent, path.cells[i]);
        if (d < nearest_d) {
            nearest_d = d;
            nearest = i;
        }
    }
    for (std::size_t i = nearest; i < path.cells.size(); ++i)
        if (path.cells[i] != agent && !grid.passable(path.cells[i], rc))
            return ReplanEvent{ReplanCause::NewObstacle, timestep};
    if (nearest_d > max_deviation) return ReplanEvent{ReplanCause::PathDeviation, timestep};
    return std::nullopt;
}

}  // namespace gridrelay
