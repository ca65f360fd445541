#pragma once
// control_reward.hpp - path-following step controller and the per-step reward
// R = l1 R_goal + l2 R_progress - l3 R_collision - l4 R_drift.

#include <cmath>
#include <span>
#include <string>

#include "core.hpp"
#include "planner.hpp"
#include "raster.hpp"
#include "semantic_grid.hpp"

namespace gridrelay {

enum class Primitive { Forward, TurnLeft, TurnRight, Interact, Stop };

inline std::string_view to_string(Primitive p) {
    switch (p) {
        case Primitive::Forward: return "forward";
        case Primitive::TurnLeft: return "turn-left";
        case Primitive::TurnRight: return "turn-right";
        case Primitive::Interact: return "interact";
        case Primitive::Stop: return "stop";
    }
    return "stop";
}

inline Primitive primitive_from_string(std::string_view s) {
    for (Primitive p : {Primitive::Forward, Primitive::TurnLeft, Primitive::TurnRight, Primitive::Interact,
                        Primitive::Stop})
        if (to_string(p) == s) return p;
    throw Error(ErrorCode::InvalidInput, "unknown primitive " + std::string(s));
}

struct RewardConfig {
    double lambda_goal = 10.0;
    double lambda_progress = 1.0;
    double lambda_collision = 1.0;
    double lambda_drift = 0.5;
    double success_radius = 1.0;  // m

    void validate() const {
        if (lambda_goal < 0 || lambda_progress < 0 || lambda_collision < 0 || lambda_drift < 0)
            throw Error(ErrorCode::InvalidParameter, "reward weights must be nonnegative");
        if (!(success_radius > 0)) throw Error(ErrorCode::InvalidParameter, "success_radius");
    }
};

struct RewardTerms {
    double goal = 0.0;
    double progress = 0.0;
    double collision = 0.0;
    double drift = 0.0;
    double total = 0.0;
};

inline RewardTerms step_reward(double prev_dist, double new_dist, bool reached, bool collided, bool drift,
                               const RewardConfig& cfg) {
    if (prev_dist < 0 || new_dist < 0) throw Error(ErrorCode::InvalidInput, "distances must be nonnegative");
    RewardTerms r;
    r.goal = reached ? 1.0 : 0.0;
    r.progress = prev_dist - new_dist;
    r.collision = collided ? 1.0 : 0.0;
    r.drift = drift ? 1.0 : 0.0;
    r.total = cfg.lambda_goal * r.goal + cfg.lambda_progress * r.progress - cfg.lambda_collision * r.collision -
              cfg.lambda_drift * r.drift;
    return r;
}

struct StepOutcome {
    Primitive action = Primitive::Stop;
    bool collided = false;
    Pose pose{};
    RewardTerms reward{};
};

// Next primitive along a cell path: turn when the bearing to the next cell is
// more than 45 degrees off, otherwise advance; stop inside stop_radius of the end.
inline Primitive follow_path(const Path& path, const Pose& pose, const GridGeometry& geom, double stop_radius) {
    if (path.empty()) throw Error(ErrorCode::InvalidInput, "empty path");
    if (distance(pose.position, geom.cell_center(path.cells.back())) <= stop_radius + 1e-9) return Primitive::Stop;
    const Cell here = geom.cell_of(pose.position);
    std::size_t idx = 0;
    int best = std::numeric_limits<int>::max();
    for (std::size_t i = 0; i < path.cells.size(); ++i) {
        const int d = chebyshev(here, path.cells[i]);
        if (d < best) {
            best = d;
            idx = i;
        }
    }
    const Cell next = (best == 0 && idx + 1 < path.cells.size()) ? path.cells[idx + 1] : path.cells[idx];
    const Vec2 d = geom.cell_center(next) - pose.position;
    if (d.norm() < 1e-12) return Primitive::Stop;
    const double off = wrap_angle(std::atan2(d.y, d.x) - pose.heading);
    if (std::abs(off) <= kPi / 4 + 1e-9) return Primitive::Forward;
    return off > 0 ? Primitive::TurnLeft : Primitive::TurnRight;
}

struct SeenObject {
    std::string category;
    Vec2 position{};
    bool unrelated = false;  // zero prior weight to the goal
};

// Drift: the heading points within 30 degrees of an unrelated detected object
// and the step closes on that object faster than on the goal.
inline bool is_drift(const Pose& before, const Pose& after, std::span<const SeenObject> seen, double goal_before,
                     double goal_after, double cone = kPi / 6) {
    const double goal_gain = goal_before - goal_after;
    for (const auto& o : seen) {
        if (!o.unrelated) continue;
        const Vec2 d = o.position - before.position;
        if (d.norm() < 1e-12) continue;
        if (angle_between(std::atan2(d.y, d.x), before.heading) > cone + 1e-12) continue;
        const double gain = distance(before.position, o.position) - distance(after.position, o.position);
        if (gain > goal_gain) return true;
    }
    return false;
}

}  // namespace gridrelay
