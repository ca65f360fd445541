#include <gtest/gtest.h>

#include <deque>
#include <sstream>

#include "gridrelay/semantic_grid.hpp"

using namespace gridrelay;

namespace {

GridGeometry geom(int rows, int cols, double res = 0.05) { return {rows, cols, res, {0, 0}}; }

// Flood fill over free cells, independent of ReachabilityField.
bool flood_reaches(const SemanticGrid& g, Cell from, Vec2 anchor, double eps) {
    std::vector<char> seen(g.rows() * g.cols(), 0);
    std::deque<Cell> q{from};
    seen[from.row * g.cols() + from.col] = 1;
    while (!q.empty()) {
        Cell u = q.front();
        q.pop_front();
        if (distance(g.geometry().cell_center(u), anchor) <= eps) return true;
        for (auto& d : kDir4) {
            Cell v{u.row + d[0], u.col + d[1]};
            if (!g.in_bounds(v) || !g.is_free(v) || seen[v.row * g.cols() + v.col]) continue;
            seen[v.row * g.cols() + v.col] = 1;
            q.push_back(v);
        }
    }
    return false;
}

}  // namespace

TEST(GridGeometry, CellConversions) {
    const auto g = geom(10, 10);
    EXPECT_EQ(g.world_to_cell({0.07, 0.0}), (Cell{0, 1}));
    const Vec2 w = g.cell_to_world({0, 1});
    EXPECT_NEAR(w.x, 0.075, 1e-12);
    EXPECT_NEAR(w.y, 0.025, 1e-12);
    EXPECT_THROW(g.world_to_cell({-0.01, 0}), Error);
    EXPECT_THROW(g.cell_to_world({10, 0}), Error);
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        const Vec2 p{rng.uniform(0, 0.4999), rng.uniform(0, 0.4999)};
        const Vec2 back = g.cell_to_world(g.world_to_cell(p));
        EXPECT_LE(std::abs(back.x - p.x), 0.025 + 1e-12);
        EXPECT_LE(std::abs(back.y - p.y), 0.025 + 1e-12);
    }
}

TEST(TraverseSegment, MatchesSlabOracle) {
    const auto g = geom(20, 20, 1.0);
    Rng rng(4);
    for (int i = 0; i < 2000; ++i) {
        const Vec2 a{rng.uniform(0.01, 19.99), rng.uniform(0.01, 19.99)};
        const Vec2 b{rng.uniform(0.01, 19.99), rng.uniform(0.01, 19.99)};
        std::vector<Cell> cells;
        EXPECT_TRUE(traverse_segment(g, a, b, [&](Cell c) {
            cells.push_back(c);
            return true;
        }));
        for (std::size_t k = 1; k < cells.size(); ++k)
            EXPECT_LE(std::abs(cells[k].row - cells[k - 1].row) + std::abs(cells[k].col - cells[k - 1].col), 2);
        // every visited cell's box is touched, and every cell box crossed in its interior is visited
        for (const Cell c : cells)
            EXPECT_TRUE(segment_hits_box(a, b, {c.col - 1e-9, c.row - 1e-9}, {c.col + 1 + 1e-9, c.row + 1 + 1e-9}));
        for (int r = 0; r < 20; ++r)
            for (int c = 0; c < 20; ++c)
                if (segment_hits_box(a, b, {c + 1e-6, r + 1e-6}, {c + 1 - 1e-6, r + 1 - 1e-6}))
                    EXPECT_NE(std::find(cells.begin(), cells.end(), Cell{r, c}), cells.end());
    }
}

TEST(SemanticGridUpdate, TwoRaysSetFree) {
    SemanticGrid grid(geom(10, 10), {"Mug"});
    const Pose pose{{0.025, 0.025}, 0.0};
    RangeScan scan{{{0.475, 0.025}}, {false}};
    grid.update(scan, {}, pose);
    EXPECT_FALSE(grid.is_free({0, 5}));
    grid.update(scan, {}, pose);
    for (int c = 0; c < 10; ++c) EXPECT_TRUE(grid.is_free({0, c})) << c;
    EXPECT_TRUE(grid.is_unknown({1, 0}));
}

TEST(SemanticGridUpdate, ObstacleClearsAfterTwoUnreinforcedSteps) {
    SemanticGrid grid(geom(10, 10), {});
    const Pose pose{{0.025, 0.025}, 0.0};
    const RangeScan hit{{{0.275, 0.025}}, {true}}, through{{{0.475, 0.025}}, {false}};
    grid.update(hit, {}, pose);
    grid.update(hit, {}, pose);
    ASSERT_TRUE(grid.is_obstacle({0, 5}));
    EXPECT_EQ(grid.evidence({0, 5}, SemanticGrid::kObstacle), 2);
    grid.update(through, {}, pose);
    EXPECT_TRUE(grid.is_obstacle({0, 5}));
    grid.update(through, {}, pose);
    EXPECT_FALSE(grid.is_obstacle({0, 5}));
    EXPECT_TRUE(grid.is_free({0, 5}));
}

TEST(SemanticGridUpdate, DetectionOutsideConeIgnored) {
    SemanticGrid grid(geom(10, 10), {"Mug"});
    const Pose pose{{0.025, 0.025}, 0.0};
    const std::vector<GridDetection> d{{"Mug", {0.025, 0.4}}};  // 90 degrees left
    const auto before = grid.content_hash();
    grid.update({}, d, pose);
    grid.update({}, d, pose);
    EXPECT_EQ(grid.content_hash(), before);
    EXPECT_THROW(grid.update({}, d, Pose{{5, 5}, 0}), Error);
}

TEST(SemanticGridUpdate, FuzzInvariants) {
    Rng rng(99);
    SemanticGrid grid(geom(16, 16, 0.25), {"Mug", "Rug"}, {"Rug"});
    for (int step = 0; step < 20000; ++step) {
        const Pose pose{{rng.uniform(0.1, 3.9), rng.uniform(0.1, 3.9)}, rng.uniform(-kPi, kPi)};
        RangeScan scan;
        for (int r = 0; r < 8; ++r) {
            const double a = pose.heading + rng.uniform(-kPi / 4, kPi / 4);
            const double len = rng.uniform(0.1, 3);
            Vec2 e{pose.position.x + len * std::cos(a), pose.position.y + len * std::sin(a)};
            e.x = std::clamp(e.x, 0.001, 3.999);
            e.y = std::clamp(e.y, 0.001, 3.999);
            scan.endpoints.push_back(e);
            scan.hits.push_back(rng.bernoulli(0.5));
        }
        std::vector<GridDetection> dets;
        if (rng.bernoulli(0.5)) dets.push_back({rng.bernoulli(0.5) ? "Mug" : "Rug", scan.endpoints[0]});
        SemanticGrid copy = grid;
        grid.update(scan, dets, pose);
        copy.update(scan, dets, pose);
        ASSERT_TRUE(grid.same_contents(copy));
        for (std::size_t idx : grid.last_cone()) {
            const Cell c = grid.geometry().cell_at(idx);
            ASSERT_FALSE(grid.is_free(c) && grid.is_obstacle(c));
            if (grid.bit(c, 2)) ASSERT_TRUE(grid.is_obstacle(c));
        }
    }
}

TEST(SemanticGridUpdate, RepeatedObstacleSetsBit) {
    SemanticGrid grid(geom(10, 10), {});
    const Pose pose{{0.025, 0.025}, 0.0};
    const RangeScan hit{{{0.275, 0.025}}, {true}};
    for (int k = 1; k <= 20; ++k) {
        grid.update(hit, {}, pose);
        if (k >= 2) EXPECT_TRUE(grid.is_obstacle({0, 5}));
        EXPECT_LE(grid.evidence({0, 5}, SemanticGrid::kObstacle), 15);
    }
}

TEST(Reachable, Examples) {
    SemanticGrid grid(geom(7, 7, 0.1), {});
    for (int r = 0; r < 7; ++r)
        for (int c = 0; c < 7; ++c) grid.set_cell({r, c}, true, false);
    const Vec2 agent = grid.cell_to_world({0, 0});
    EXPECT_TRUE(reachable(grid, grid.cell_to_world({0, 1}), agent, 0.1));
    // ring around (4,4)
    for (int r = 3; r <= 5; ++r)
        for (int c = 3; c <= 5; ++c)
            if (r != 4 || c != 4) grid.set_cell({r, c}, false, true);
    EXPECT_FALSE(reachable(grid, grid.cell_to_world({4, 4}), agent, 0.1));
    // anchor on obstacle with a connected free cell at 0.9 eps
    SemanticGrid g2(geom(5, 5, 0.1), {});
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 5; ++c) g2.set_cell({r, c}, c != 2, c == 2);
    const Vec2 anchor{0.26, 0.25};  // on the obstacle column, 0.09 m from the center of free cell (2,3)
    EXPECT_TRUE(reachable(g2, anchor, g2.cell_to_world({0, 4}), 0.1));
    EXPECT_FALSE(reachable(g2, anchor + Vec2{-0.18, 0}, g2.cell_to_world({0, 4}), 0.1));
    EXPECT_THROW(reachable(g2, anchor, g2.cell_to_world({0, 2}), 0.1), Error);
    EXPECT_THROW(reachable(g2, anchor, g2.cell_to_world({0, 4}), 0.05), Error);
}

TEST(Reachable, MatchesFloodFillAndIsSymmetric) {
    Rng rng(8);
    for (int trial = 0; trial < 300; ++trial) {
        SemanticGrid g(geom(12, 12, 0.1), {});
        for (int r = 0; r < 12; ++r)
            for (int c = 0; c < 12; ++c) {
                const double u = rng.uniform();
                g.set_cell({r, c}, u < 0.6, u >= 0.6 && u < 0.9);
            }
        Cell a{rng.uniform_int(0, 11), rng.uniform_int(0, 11)}, b{rng.uniform_int(0, 11), rng.uniform_int(0, 11)};
        g.set_cell(a, true, false);
        g.set_cell(b, true, false);
        const double eps = rng.uniform(0.1, 0.3);
        const Vec2 target{rng.uniform(0, 1.2), rng.uniform(0, 1.2)};
        EXPECT_EQ(reachable(g, target, g.cell_to_world(a), eps), flood_reaches(g, a, target, eps));
        EXPECT_EQ(reachable(g, g.cell_to_world(b), g.cell_to_world(a), 0.1),
                  reachable(g, g.cell_to_world(a), g.cell_to_world(b), 0.1));
    }
}

TEST(SemanticGridDump, Header) {
    SemanticGrid g(geom(2, 3, 0.05), {"Mug"});
    g.set_cell({0, 0}, false, true, std::vector<std::string>{"Mug"});
    std::ostringstream os;
    g.dump(os);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "GRID v1 3 2 3 0.05");
    EXPECT_NE(os.str().find("# Mug\n1 0 0\n0 0 0\n"), std::string::npos);
}
