#pragma once
// raster.hpp - world/cell geometry and exact segment traversal (Amanatides & Woo),
// shared by the simulator, the semantic grid and the line-of-sight checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>

#include "core.hpp"

namespace gridrelay {

struct GridGeometry {
    int rows = 0;
    int cols = 0;
    double resolution = 0.05;  // meters per cell
    Vec2 origin{};             // world coordinate of the corner of cell (0,0)

    bool in_bounds(Cell c) const { return c.row >= 0 && c.col >= 0 && c.row < rows && c.col < cols; }
    std::size_t index(Cell c) const { return static_cast<std::size_t>(c.row) * cols + c.col; }
    Cell cell_at(std::size_t i) const { return {static_cast<int>(i / cols), static_cast<int>(i % cols)}; }
    std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }

    // Unchecked floor mapping.
    Cell cell_of(Vec2 p) const {
        return {static_cast<int>(std::floor((p.y - origin.y) / resolution)),
                static_cast<int>(std::floor((p.x - origin.x) / resolution))};
    }

    Cell world_to_cell(Vec2 p) const {
        const Cell c = cell_of(p);
        if (!in_bounds(c)) throw Error(ErrorCode::OutOfBounds, "world point outside grid extent");
        return c;
    }

    Vec2 cell_to_world(Cell c) const {
        if (!in_bounds(c)) throw Error(ErrorCode::OutOfBounds, "cell outside grid extent");
        return cell_center(c);
    }

    Vec2 cell_center(Cell c) const {
        return {origin.x + (c.col + 0.5) * resolution, origin.y + (c.row + 0.5) * resolution};
    }
};

inline constexpr int kDir4[4][2] = {{0, 1}, {1, 0}, {0, -1}, {-1, 0}};  // (drow, dcol)
inline constexpr int kDir8[8][2] = {{0, 1}, {1, 0}, {0, -1}, {-1, 0}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}};

// Visits every cell whose interior the segment a->b crosses, in order, starting
// with the cell containing a. A crossing that passes exactly through a cell
// corner steps diagonally. `visit(Cell)` returns false to stop early.
// Returns true iff the traversal reached the cell containing b.
template <class Visit>
bool traverse_segment(const GridGeometry& g, Vec2 a, Vec2 b, Visit&& visit) {
    const double ax = (a.x - g.origin.x) / g.resolution, ay = (a.y - g.origin.y) / g.resolution;
    const double bx = (b.x - g.origin.x) / g.resolution, by = (b.y - g.origin.y) / g.resolution;
    Cell cur{static_cast<int>(std::floor(ay)), static_cast<int>(std::floor(ax))};
    const Cell end{static_cast<int>(std::floor(by)), static_cast<int>(std::floor(bx))};
    const double dx = bx - ax, dy = by - ay;
    constexpr double inf = std::numeric_limits<double>::infinity();
    const int step_c = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
    const int step_r = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
    const double delta_c = step_c ? 1.0 / std::abs(dx) : inf;
    const double delta_r = step_r ? 1.0 / std::abs(dy) : inf;
    double tmax_c = step_c > 0 ? (cur.col + 1 - ax) / dx : (step_c < 0 ? (ax - cur.col) / -dx : inf);
    double tmax_r = step_r > 0 ? (cur.row + 1 - ay) / dy : (step_r < 0 ? (ay - cur.row) / -dy : inf);

    if (!visit(cur)) return false;
    const int budget = std::abs(end.col - cur.col) + std::abs(end.row - cur.row) + 2;
    for (int i = 0; i < budget && cur != end; ++i) {
        constexpr double tie = 1e-12;
        double t;
        if (std::abs(tmax_c - tmax_r) < tie) {
            t = tmax_c;
            if (t > 1.0) break;
            cur.col += step_c;
            cur.row += step_r;
            tmax_c += delta_c;
            tmax_r += delta_r;
        } else if (tmax_c < tmax_r) {
            t = tmax_c;
            if (t > 1.0) break;
            cur.col += step_c;
            tmax_c += delta_c;
        } else {
            t = tmax_r;
            if (t > 1.0) break;
            cur.row += step_r;
            tmax_r += delta_r;
        }
        if (!visit(cur)) return false;
    }
    return cur == end;
}

// Segment vs axis-aligned box intersection (slab method). Used as an
// independent line-of-sight oracle in tests and diagnostics.
inline bool segment_hits_box(Vec2 a, Vec2 b, Vec2 lo, Vec2 hi) {
    double t0 = 0.0, t1 = 1.0;
    const double d[2] = {b.x - a.x, b.y - a.y};
    const double p[2] = {a.x, a.y};
    const double l[2] = {lo.x, lo.y}, h[2] = {hi.x, hi.y};
    for (int k = 0; k < 2; ++k) {
        if (std::abs(d[k]) < 1e-15) {
            if (p[k] < l[k] || p[k] > h[k]) return false;
        } else {
            double ta = (l[k] - p[k]) / d[k], tb = (h[k] - p[k]) / d[k];
            if (ta > tb) std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
            if (t0 > t1) return false;
        }
    }
    return true;
}

}  // namespace gridrelay
