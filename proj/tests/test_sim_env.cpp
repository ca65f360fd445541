#include <gtest/gtest.h>

#include <sstream>

#include "gridrelay/harness.hpp"
#include "gridrelay/scenario_io.hpp"
#include "gridrelay/sim_env.hpp"
#include "scenarios.hpp"

using namespace gridrelay;

namespace {

// Dense sampling along the segment; endpoint cells are exempt.
bool sampled_los(const Scenario& s, Vec2 a, Vec2 b) {
    const Cell ca = s.geometry.cell_of(a), cb = s.geometry.cell_of(b);
    const double len = distance(a, b);
    const int n = std::max(1, static_cast<int>(len / 0.002));
    for (int i = 0; i <= n; ++i) {
        const double t = static_cast<double>(i) / n;
        const Cell c = s.geometry.cell_of({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
        if (c == ca || c == cb) continue;
        if (s.wall(c)) return false;
        const auto* o = s.object_at(c);
        if (o && o->large && !o->traversable) return false;
    }
    return true;
}

std::vector<Pose> free_poses(const Scenario& s, Rng& rng, int n) {
    std::vector<Pose> out;
    while (static_cast<int>(out.size()) < n) {
        const Cell c{rng.uniform_int(0, s.geometry.rows - 1), rng.uniform_int(0, s.geometry.cols - 1)};
        if (s.blocked(c)) continue;
        out.push_back({s.geometry.cell_center(c), rng.uniform(-kPi, kPi)});
    }
    return out;
}

}  // namespace

TEST(Generate, SameSeedSameScenario) {
    EXPECT_EQ(generate(42).hash(), generate(42).hash());
    EXPECT_NE(generate(42).hash(), generate(43).hash());
}

TEST(Generate, StructuralInvariants) {
    for (std::uint64_t seed = 0; seed < 80; ++seed) {
        const Scenario s = generate(seed);
        SCOPED_TRACE(seed);
        EXPECT_GE(s.rooms.size(), 2u);
        EXPECT_LE(s.rooms.size(), 6u);
        EXPECT_GE(s.objects.size(), 8u);
        EXPECT_LE(s.objects.size(), 30u);
        for (const auto& o : s.objects) {
            ASSERT_GE(o.room, 0);
            EXPECT_TRUE(s.rooms[o.room].contains(o.cell));
            EXPECT_FALSE(s.wall(o.cell));
        }
        for (const auto& d : s.doorways) {
            ASSERT_FALSE(d.cells.empty());
            ASSERT_NE(d.room_a, d.room_b);
            bool touches_a = false, touches_b = false;
            for (const Cell c : d.cells) {
                EXPECT_FALSE(s.wall(c));
                for (const auto& k : kDir4) {
                    const Cell n{c.row + k[0], c.col + k[1]};
                    touches_a = touches_a || s.rooms[d.room_a].contains(n);
                    touches_b = touches_b || s.rooms[d.room_b].contains(n);
                }
            }
            EXPECT_TRUE(touches_a && touches_b);
        }
        EXPECT_EQ(s.doorways.size(), s.rooms.size() - 1);
        EXPECT_FALSE(s.blocked(s.geometry.cell_of(s.start.position)));
        EXPECT_GT(s.shortest_path, 0.0);
    }
}

TEST(Generate, ShortestPathMatchesGroundTruthBfs) {
    // 4-connected unit costs: A* distance equals the breadth-first step count
    for (std::uint64_t seed = 100; seed < 160; ++seed) {
        const Scenario s = generate(seed);
        const auto field = goal_distance_field(s, s.goal);
        EXPECT_NEAR(s.shortest_path, field[s.geometry.index(s.geometry.cell_of(s.start.position))], 1e-9) << seed;
        const Cell sc = s.geometry.cell_of(s.start.position);
        EXPECT_DOUBLE_EQ(s.shortest_path, astar_distance_to(s, sc, s.goal));
    }
}

TEST(Generate, OneRoomHasNoDoorways) {
    SimConfig cfg;
    cfg.min_rooms = cfg.max_rooms = 1;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Scenario s = generate(seed, cfg);
        EXPECT_EQ(s.rooms.size(), 1u);
        EXPECT_TRUE(s.doorways.empty());
        const auto scenes = s.room_scenes();
        ASSERT_EQ(scenes.size(), 1u);
        std::set<std::string> all;
        for (const auto& o : s.objects) all.insert(o.category);
        EXPECT_EQ(CategorySet(all.begin(), all.end()), scenes[0]);
    }
}

TEST(Generate, UnsatisfiableConfig) {
    SimConfig cfg;
    cfg.width = 4;
    cfg.height = 4;
    cfg.min_rooms = cfg.max_rooms = 1;
    cfg.min_objects = cfg.max_objects = 200;
    try {
        generate(1, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::GenerationFailed);
    }
    cfg = SimConfig{};
    cfg.max_rooms = 0;
    EXPECT_THROW(generate(1, cfg), Error);
}

TEST(Generate, CorpusReflectsTemplates) {
    const auto corpus = build_corpus(SeedRange{0, 999});
    const auto g = CoOccurrenceGraph::build_from_corpus(corpus);
    EXPECT_GT(g.weight("Mug", "Kettle"), g.weight("Mug", "Bed"));
    EXPECT_GT(g.weight("Pillow", "Bed"), g.weight("Pillow", "Stove"));
}

TEST(ScenarioIo, RoundTrip) {
    for (std::uint64_t seed : {3u, 42u, 600u}) {
        const Scenario s = generate(seed);
        std::stringstream ss;
        write_scenario(ss, s);
        const Scenario t = read_scenario(ss);
        EXPECT_EQ(t.hash(), s.hash());
        EXPECT_EQ(t.doorways.size(), s.doorways.size());
        EXPECT_EQ(t.vocabulary, s.vocabulary);
        EXPECT_EQ(t.synonyms, s.synonyms);
    }
    std::stringstream bad(R"({"schema":"SCENARIO v0"})");
    EXPECT_THROW(read_scenario(bad), Error);
    std::stringstream junk("{");
    EXPECT_THROW(read_scenario(junk), Error);
}

TEST(Observe, WallOccludes) {
    auto s = fixture::rooms(10, 20, 10, 1, 2);
    fixture::add(s, "Fridge", {6, 14});
    fixture::add(s, "Sofa", {6, 5});
    const Pose pose{s.geometry.cell_center({6, 7}), 0.0};
    Rng n(1), e(2);
    const auto ob = observe(s, pose, SensorConfig{}, n, e);
    ASSERT_EQ(ob.detections.size(), 0u);  // the fridge is behind the wall, the sofa behind the agent
    const Pose back{pose.position, kPi};
    const auto ob2 = observe(s, back, SensorConfig{}, n, e);
    ASSERT_EQ(ob2.detections.size(), 1u);
    EXPECT_EQ(ob2.detections[0].category, "Sofa");
}

TEST(Observe, NoiselessPositionIsExact) {
    auto s = fixture::rooms(10, 20, 0, 0, 0);
    fixture::add(s, "Fridge", {5, 12});
    SensorConfig cfg;
    cfg.position_noise = 0.0;
    Rng n(1), e(2);
    const auto ob = observe(s, Pose{s.geometry.cell_center({5, 4}), 0.0}, cfg, n, e);
    ASSERT_EQ(ob.detections.size(), 1u);
    EXPECT_EQ(ob.detections[0].position.x, s.objects[0].position.x);
    EXPECT_EQ(ob.detections[0].position.y, s.objects[0].position.y);
    EXPECT_NEAR(dot(ob.detections[0].embedding, ob.detections[0].embedding), 1.0, 1e-12);
    EXPECT_EQ(ob.ray_angles.size(), 64u);
}

TEST(Observe, SmallObjectsOnlyUpClose) {
    auto s = fixture::rooms(10, 30, 0, 0, 0);
    fixture::add(s, "Mug", {5, 20});
    Rng n(1), e(2);
    EXPECT_TRUE(observe(s, Pose{s.geometry.cell_center({5, 4}), 0.0}, SensorConfig{}, n, e).detections.empty());
    EXPECT_EQ(observe(s, Pose{s.geometry.cell_center({5, 14}), 0.0}, SensorConfig{}, n, e).detections.size(), 1u);
}

TEST(Observe, PoseInWallThrows) {
    const auto s = fixture::rooms(10, 20, 10, 1, 2);
    Rng n(1), e(2);
    try {
        observe(s, Pose{s.geometry.cell_center({5, 10}), 0.0}, SensorConfig{}, n, e);
        FAIL();
    } catch (const Error& err) {
        EXPECT_EQ(err.code(), ErrorCode::InvalidPose);
    }
}

TEST(Observe, OcclusionSoundness) {
    Rng rng(99);
    const SensorConfig cfg;
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const Scenario s = generate(seed);
        Rng n(seed), e(seed + 1);
        for (const Pose& p : free_poses(s, rng, 20)) {
            const auto ob = observe(s, p, cfg, n, e);
            for (const auto& d : ob.detections) {
                const ObjectInstance* o = nullptr;
                for (const auto& x : s.objects)
                    if (x.category == d.category && std::abs(distance(p.position, x.position.xy()) - d.range) < 1e-12) o = &x;
                ASSERT_NE(o, nullptr);
                EXPECT_TRUE(sampled_los(s, p.position, o->position.xy()));
                EXPECT_LE(d.range, o->large ? cfg.range : cfg.small_range);
                const Vec2 v = o->position.xy() - p.position;
                if (v.norm() > 1e-9) EXPECT_LE(angle_between(std::atan2(v.y, v.x), p.heading), cfg.fov / 2 + 1e-9);
            }
        }
    }
}

TEST(Observe, DeterministicStreams) {
    const Scenario s = generate(5);
    auto run = [&] {
        Rng n = make_stream(5, Stream::SensorNoise), e = make_stream(5, Stream::Embedding);
        Pose p = s.start;
        std::vector<double> out;
        const Primitive seq[] = {Primitive::Forward, Primitive::TurnLeft, Primitive::Forward, Primitive::Forward,
                                 Primitive::TurnRight, Primitive::Forward};
        for (int rep = 0; rep < 5; ++rep)
            for (Primitive a : seq) {
                p = act(s, p, a).pose;
                const auto ob = observe(s, p, SensorConfig{}, n, e);
                out.push_back(p.position.x);
                out.push_back(p.position.y);
                out.push_back(p.heading);
                for (const auto& d : ob.detections) {
                    out.push_back(d.position.x);
                    out.push_back(d.embedding[0]);
                }
                out.insert(out.end(), ob.ray_distances.begin(), ob.ray_distances.end());
            }
        return out;
    };
    EXPECT_EQ(run(), run());
}

TEST(Act, Examples) {
    const auto s = fixture::rooms(10, 20, 10, 1, 2);
    const Pose p{s.geometry.cell_center({5, 5}), 0.0};
    auto r = act(s, p, Primitive::Forward);
    EXPECT_FALSE(r.collided);
    EXPECT_NEAR(r.pose.position.x - p.position.x, 0.25, 1e-12);
    EXPECT_EQ(r.pose.position.y, p.position.y);

    const Pose at_wall{s.geometry.cell_center({5, 9}), 0.0};
    r = act(s, at_wall, Primitive::Forward);
    EXPECT_TRUE(r.collided);
    EXPECT_EQ(r.pose.position.x, at_wall.position.x);
    EXPECT_EQ(r.pose.position.y, at_wall.position.y);

    Pose q = p;
    for (int i = 0; i < 4; ++i) q = act(s, q, Primitive::TurnLeft).pose;
    EXPECT_NEAR(std::abs(wrap_angle(q.heading - p.heading)), 0.0, 1e-12);
    q = act(s, p, Primitive::TurnRight).pose;
    EXPECT_NEAR(wrap_angle(q.heading - p.heading), -kPi / 2, 1e-12);
}

TEST(Expert, VisibleGoalGoesDirect) {
    auto s = fixture::rooms(10, 20, 0, 0, 0);
    fixture::add(s, "Mug", {5, 7});
    fixture::add(s, "Counter", {8, 15});
    fixture::task(s, {5, 3}, kPi, "Mug");  // facing away: visibility ignores heading
    const auto d = expert_demonstration(s);
    EXPECT_EQ(d.goal, "Mug");
    EXPECT_EQ(d.subgoals, (std::vector<Subgoal>{{Action::Goto, "Mug"}, {Action::Interact, "Mug"}}));
}

TEST(Expert, OccludedGoalRelaysThroughNeighbour) {
    auto s = fixture::rooms(16, 40, 16, 1, 3);
    fixture::add(s, "Sofa", {8, 4});
    fixture::add(s, "Counter", {13, 34});
    fixture::add(s, "Mug", {12, 34});
    fixture::task(s, {8, 8}, 0.0, "Mug");
    const auto d = expert_demonstration(s);
    EXPECT_EQ(d.subgoals, (std::vector<Subgoal>{{Action::Goto, "Counter"}, {Action::Goto, "Mug"}, {Action::Interact, "Mug"}}));
    EXPECT_EQ(expert_demonstration(s), d);
}

TEST(Expert, UnreachableGoalHasNoDemo) {
    auto s = fixture::rooms(10, 20, 10, 1, 2);
    fixture::add(s, "Stool", {1, 10});
    fixture::add(s, "Stool", {2, 10});
    fixture::add(s, "Mug", {5, 15});
    fixture::task(s, {5, 4}, 0.0, "Mug", 3.0);
    try {
        expert_demonstration(s);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoDemo);
    }
}

TEST(Expert, DeterministicPerSeed) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        try {
            EXPECT_EQ(expert_demonstration(generate(seed)), expert_demonstration(generate(seed)));
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::NoDemo);
        }
    }
}

TEST(Expert, ChainsEndAtTheGoal) {
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        const Scenario s = generate(seed);
        const auto d = expert_demonstration(s);
        ASSERT_GE(d.subgoals.size(), 2u);
        EXPECT_EQ(d.subgoals.back(), (Subgoal{Action::Interact, s.goal}));
        EXPECT_EQ(d.subgoals[d.subgoals.size() - 2], (Subgoal{Action::Goto, s.goal}));
        for (std::size_t i = 0; i + 2 < d.subgoals.size(); ++i) {
            EXPECT_EQ(d.subgoals[i].action, Action::Goto);
            EXPECT_FALSE(s.instances(d.subgoals[i].anchor).empty());
        }
    }
}
