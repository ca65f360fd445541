#pragma once
// semantic_grid.hpp - H x W x C multi-hot semantic occupancy grid with
// saturating per-channel evidence, cone-limited decay and reachability queries.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"
#include "raster.hpp"

namespace gridrelay {

struct Pose {
    Vec2 position{};
    double heading = 0.0;  // radians, [-pi, pi)
};

struct RangeScan {
    std::vector<Vec2> endpoints;  // world points, rays start at the pose
    std::vector<bool> hits;       // endpoint lies on an obstacle
};

struct GridDetection {
    std::string category;
    Vec2 position{};
};

struct SensorCone {
    double fov = kPi / 2.0;  // radians, full width
    double range = 5.0;      // m

    bool contains(const Pose& pose, Vec2 p) const {
        const Vec2 d = p - pose.position;
        const double r = d.norm();
        if (r > range) return false;
        if (r < 1e-12) return true;
        return angle_between(std::atan2(d.y, d.x), pose.heading) <= 0.5 * fov + 1e-9;
    }
};

struct EvidenceConfig {
    std::uint8_t set_threshold = 2;
    std::uint8_t saturation = 15;
};

struct ReachConfig {
    bool unknown_passable = false;  // true: free-space assumption for unobserved cells
    bool eight_connected = false;
};

class SemanticGrid {
public:
    static constexpr std::size_t kFree = 0;
    static constexpr std::size_t kObstacle = 1;

    SemanticGrid() = default;
    SemanticGrid(GridGeometry geom, std::vector<std::string> categories, std::set<std::string> traversable = {},
                 EvidenceConfig ev = {})
        : geom_(geom), categories_(std::move(categories)), ev_cfg_(ev) {
        if (!(geom_.resolution > 0)) throw Error(ErrorCode::InvalidParameter, "resolution must be positive");
        if (geom_.rows <= 0 || geom_.cols <= 0) throw Error(ErrorCode::InvalidParameter, "grid extent");
        for (const auto& c : categories_) traversable_.push_back(traversable.count(c) ? 1 : 0);
        const std::size_t n = geom_.size() * channels();
        evidence_.assign(n, 0);
        bits_.assign(n, 0);
        reinforced_stamp_.assign(n, 0);
        cone_stamp_.assign(geom_.size(), 0);
    }

    const GridGeometry& geometry() const { return geom_; }
    int rows() const { return geom_.rows; }
    int cols() const { return geom_.cols; }
    double resolution() const { return geom_.resolution; }
    std::size_t channels() const { return 2 + categories_.size(); }
    const std::vector<std::string>& categories() const { return categories_; }

    std::vector<std::string> channel_names() const {
        std::vector<std::string> names{"free", "obstacle"};
        names.insert(names.end(), categories_.begin(), categories_.end());
        return names;
    }

    std::optional<std::size_t> channel_of(std::string_view category) const {
        for (std::size_t k = 0; k < categories_.size(); ++k)
            if (categories_[k] == category) return 2 + k;
        return std::nullopt;
    }

    bool traversable_channel(std::size_t ch) const { return ch >= 2 && traversable_[ch - 2]; }

    bool in_bounds(Cell c) const { return geom_.in_bounds(c); }
    Cell world_to_cell(Vec2 p) const { return geom_.world_to_cell(p); }
    Vec2 cell_to_world(Cell c) const { return geom_.cell_to_world(c); }

    bool bit(Cell c, std::size_t ch) const { return bits_[slot(c, ch)] != 0; }
    std::uint8_t evidence(Cell c, std::size_t ch) const { return evidence_[slot(c, ch)]; }
    bool is_free(Cell c) const { return bit(c, kFree); }
    bool is_obstacle(Cell c) const { return bit(c, kObstacle); }
    bool is_unknown(Cell c) const { return !is_free(c) && !is_obstacle(c); }

    bool passable(Cell c, const ReachConfig& rc) const {
        if (!in_bounds(c)) return false;
        return rc.unknown_passable ? !is_obstacle(c) : is_free(c);
    }

    // Writes a cell directly with saturated evidence (ground-truth maps, tests).
    void set_cell(Cell c, bool free, bool obstacle, std::span<const std::string> cats = {}) {
        if (!in_bounds(c)) throw Error(ErrorCode::OutOfBounds, "set_cell");
        if (free && obstacle) throw Error(ErrorCode::InvalidInput, "cell cannot be both free and obstacle");
        for (std::size_t ch = 0; ch < channels(); ++ch) {
            evidence_[slot(c, ch)] = 0;
            bits_[slot(c, ch)] = 0;
        }
        auto put = [&](std::size_t ch) {
            evidence_[slot(c, ch)] = ev_cfg_.saturation;
            bits_[slot(c, ch)] = 1;
        };
        if (free) put(kFree);
        if (obstacle) put(kObstacle);
        for (const auto& cat : cats) {
            auto ch = channel_of(cat);
            if (!ch) throw Error(ErrorCode::InvalidInput, "unknown category " + cat);
            if (!traversable_channel(*ch) && !obstacle)
                throw Error(ErrorCode::InvalidInput, "non-traversable category requires obstacle bit");
            put(*ch);
        }
    }

    // One evidence update. Returns the cells whose free or obstacle bit changed.
    std::vector<Cell> update(const RangeScan& scan, std::span<const GridDetection> detections, const Pose& pose,
                             const SensorCone& cone = {}) {
        if (!in_bounds(geom_.cell_of(pose.position))) throw Error(ErrorCode::OutOfBounds, "pose outside grid");
        if (scan.endpoints.size() != scan.hits.size()) throw Error(ErrorCode::InvalidInput, "scan arrays differ");
        ++stamp_;
        cone_cells_.clear();

        for (std::size_t r = 0; r < scan.endpoints.size(); ++r) {
            const Vec2 end = scan.endpoints[r];
            const Cell end_cell = geom_.cell_of(end);
            traverse_segment(geom_, pose.position, end, [&](Cell c) {
                if (!in_bounds(c)) return false;
                const bool last = c == end_cell;
                reinforce(c, last && scan.hits[r] ? kObstacle : kFree);
                return true;
            });
        }
        for (const auto& d : detections) {
            if (!cone.contains(pose, d.position)) continue;
            const Cell c = geom_.cell_of(d.position);
            if (!in_bounds(c)) continue;
            if (auto ch = channel_of(d.category)) reinforce(c, *ch);
        }

        std::vector<Cell> changed;
        const std::size_t nch = channels();
        for (std::size_t idx : cone_cells_) {
            const Cell c = geom_.cell_at(idx);
            const bool was_free = bits_[idx * nch + kFree], was_obs = bits_[idx * nch + kObstacle];
            for (std::size_t ch = 0; ch < nch; ++ch) {
                const std::size_t s = idx * nch + ch;
                if (reinforced_stamp_[s] == stamp_)
                    evidence_[s] = std::min<std::uint8_t>(ev_cfg_.saturation, evidence_[s] + 1);
                else if (evidence_[s] > 0)
                    --evidence_[s];
                if (evidence_[s] >= ev_cfg_.set_threshold) bits_[s] = 1;
                else if (evidence_[s] == 0) bits_[s] = 0;
            }
            resolve(c);
            if (bits_[idx * nch + kFree] != was_free || bits_[idx * nch + kObstacle] != was_obs) changed.push_back(c);
        }
        return changed;
    }

    // Cells in the current update's cone (ray-touched or detection cells).
    const std::vector<std::size_t>& last_cone() const { return cone_cells_; }

    // Plain-text raster dump: header then one 0/1 block per channel.
    void dump(std::ostream& os) const {
        os << "GRID v1 " << geom_.cols << ' ' << geom_.rows << ' ' << channels() << ' ' << geom_.resolution << '\n';
        const auto names = channel_names();
        for (std::size_t ch = 0; ch < channels(); ++ch) {
            os << "# " << names[ch] << '\n';
            for (int r = 0; r < geom_.rows; ++r) {
                for (int c = 0; c < geom_.cols; ++c) os << (c ? " " : "") << (bit({r, c}, ch) ? 1 : 0);
                os << '\n';
            }
        }
    }

    bool same_contents(const SemanticGrid& o) const { return bits_ == o.bits_ && evidence_ == o.evidence_; }

    std::uint64_t content_hash() const {
        std::uint64_t h = fnv1a64({reinterpret_cast<const char*>(bits_.data()), bits_.size()});
        return fnv1a64({reinterpret_cast<const char*>(evidence_.data()), evidence_.size()}, h);
    }

private:
    std::size_t slot(Cell c, std::size_t ch) const { return geom_.index(c) * channels() + ch; }

    void reinforce(Cell c, std::size_t ch) {
        const std::size_t idx = geom_.index(c);
        if (cone_stamp_[idx] != stamp_) {
            cone_stamp_[idx] = stamp_;
            cone_cells_.push_back(idx);
        }
        reinforced_stamp_[idx * channels() + ch] = stamp_;
    }

    void resolve(Cell c) {
        auto& fb = bits_[slot(c, kFree)];
        auto& ob = bits_[slot(c, kObstacle)];
        if (fb && ob) {
            if (evidence_[slot(c, kFree)] > evidence_[slot(c, kObstacle)]) ob = 0;
            else fb = 0;  // ties are conservative
        }
        for (std::size_t k = 0; k < categories_.size(); ++k)
            if (!traversable_[k] && !ob) bits_[slot(c, 2 + k)] = 0;
    }

    GridGeometry geom_{};
    std::vector<std::string> categories_;
    std::vector<char> traversable_;
    EvidenceConfig ev_cfg_{};
    std::vector<std::uint8_t> evidence_;
    std::vector<std::uint8_t> bits_;
    std::vector<std::uint32_t> reinforced_stamp_;
    std::vector<std::uint32_t> cone_stamp_;
    std::vector<std::size_t> cone_cells_;
    std::uint32_t stamp_ = 0;
};

inline SemanticGrid update(SemanticGrid grid, const RangeScan& scan, std::span<const GridDetection> detections,
                           const Pose& pose, const SensorCone& cone = {}) {
    grid.update(scan, detections, pose, cone);
    return grid;
}

// Breadth-first distances (in cell steps) from the agent's cell over passable cells.
class ReachabilityField {
public:
    ReachabilityField(const SemanticGrid& grid, Vec2 agent_pos, const ReachConfig& rc = {})
        : geom_(grid.geometry()), dist_(geom_.size(), -1) {
        const Cell start = grid.world_to_cell(agent_pos);
        if (!grid.passable(start, rc)) throw Error(ErrorCode::AgentEmbedded, "agent cell is not free");
        std::deque<Cell> q{start};
        dist_[geom_.index(start)] = 0;
        const int ndir = rc.eight_connected ? 8 : 4;
        while (!q.empty()) {
            const Cell u = q.front();
            q.pop_front();
            for (int k = 0; k < ndir; ++k) {
                const Cell v{u.row + kDir8[k][0], u.col + kDir8[k][1]};
                if (!grid.passable(v, rc) || dist_[geom_.index(v)] >= 0) continue;
                if (k >= 4 && !(grid.passable({u.row + kDir8[k][0], u.col}, rc) &&
                                grid.passable({u.row, u.col + kDir8[k][1]}, rc)))
                    continue;
                dist_[geom_.index(v)] = dist_[geom_.index(u)] + 1;
                q.push_back(v);
            }
        }
    }

    bool reached(Cell c) const { return geom_.in_bounds(c) && dist_[geom_.index(c)] >= 0; }
    int steps_to(Cell c) const { return geom_.in_bounds(c) ? dist_[geom_.index(c)] : -1; }

    // Reached cell within eps of anchor with the fewest steps; ties by (row, col).
    std::optional<Cell> nearest_within(Vec2 anchor, double eps) const {
        std::optional<Cell> best;
        int best_d = 0;
        for_cells_within(anchor, eps, [&](Cell c) {
            const int d = dist_[geom_.index(c)];
            if (d < 0) return;
            if (!best || d < best_d) {
                best = c;
                best_d = d;
            }
        });
        return best;
    }

    bool reaches(Vec2 anchor, double eps) const { return nearest_within(anchor, eps).has_value(); }

private:
    template <class F>
    void for_cells_within(Vec2 p, double eps, F&& f) const {
        const Cell lo = geom_.cell_of({p.x - eps, p.y - eps});
        const Cell hi = geom_.cell_of({p.x + eps, p.y + eps});
        for (int r = std::max(0, lo.row); r <= std::min(geom_.rows - 1, hi.row); ++r)
            for (int c = std::max(0, lo.col); c <= std::min(geom_.cols - 1, hi.col); ++c)
                if (distance(geom_.cell_center({r, c}), p) <= eps) f(Cell{r, c});
    }

    GridGeometry geom_;
    std::vector<int> dist_;
};

// True iff a passable cell within eps of the anchor connects to the agent's cell.
inline bool reachable(const SemanticGrid& grid, Vec2 anchor_pos, Vec2 agent_pos, double eps,
                      const ReachConfig& rc = {}) {
    if (!(eps >= grid.resolution())) throw Error(ErrorCode::InvalidParameter, "eps must be at least one cell");
    return ReachabilityField(grid, agent_pos, rc).reaches(anchor_pos, eps);
}

}  // namespace gridrelay
