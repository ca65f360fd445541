#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <thread>

#include "gridrelay/oracle_io.hpp"
#include "gridrelay/recovery.hpp"
#include "oracles.hpp"

using namespace gridrelay;

namespace {

CoOccurrenceGraph five() {
    // G is the goal; A..D candidates
    const std::vector<std::string> c = {"A", "B", "C", "D", "G"};
    std::vector<double> w(25, 0.0);
    auto set = [&](int i, int j, double v) { w[i * 5 + j] = w[j * 5 + i] = v; };
    set(0, 4, 0.7);
    set(1, 4, 0.4);
    set(2, 4, 0.2);
    set(0, 1, 0.3);
    set(2, 3, 0.9);
    set(3, 4, 0.1);
    return CoOccurrenceGraph::from_weights(c, w);
}

SemanticGrid open_grid(const std::vector<std::string>& cats, int n = 16) {
    SemanticGrid g(GridGeometry{n, n, 0.25, {0, 0}}, cats);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) g.set_cell({r, c}, true, false, {});
    return g;
}

void wall_in(SemanticGrid& g, Cell center) {
    for (int r = center.row - 2; r <= center.row + 2; ++r)
        for (int c = center.col - 2; c <= center.col + 2; ++c)
            if (std::abs(r - center.row) == 2 || std::abs(c - center.col) == 2) g.set_cell({r, c}, false, true, {});
}

SceneNode node(const std::string& label, Vec2 p) {
    SceneNode n;
    n.label = label;
    n.position = {p.x, p.y, 0.5};
    n.confidence = 0.9;
    return n;
}

}  // namespace

TEST(DetectFailure, Examples) {
    FailureSignals s;
    s.no_path_anchor = "Drawer";
    auto r = detect_failure(s);
    ASSERT_TRUE(r);
    EXPECT_EQ(r->kind, FailureKind::UnreachableAnchor);
    EXPECT_EQ(r->anchor, "Drawer");
    EXPECT_EQ(r->diagnostics.front(), "Anchor Drawer was unreachable");

    FailureSignals loop;
    const std::vector<std::string> seq = {"A", "B", "A", "B", "A"};
    for (std::size_t i = 0; i < seq.size(); ++i) {
        loop.targeted.push_back(seq[i]);
        r = detect_failure(loop);
        EXPECT_EQ(r.has_value(), i == 4) << i;
    }
    EXPECT_EQ(r->kind, FailureKind::AnchorLoop);
    EXPECT_EQ(r->anchor, "A");

    FailureSignals t;
    t.step = 499;
    EXPECT_FALSE(detect_failure(t));
    t.step = 500;
    EXPECT_EQ(detect_failure(t)->kind, FailureKind::Timeout);

    FailureSignals nv;
    nv.no_valid_subgoal = true;
    EXPECT_EQ(detect_failure(nv)->kind, FailureKind::NoValidSubgoal);
    EXPECT_FALSE(detect_failure(FailureSignals{}));
}

TEST(DetectFailure, PriorityOrder) {
    FailureSignals s;
    s.step = 500;
    s.no_path_anchor = "A";
    s.targeted = {"A", "A", "A"};
    s.no_valid_subgoal = true;
    EXPECT_EQ(detect_failure(s)->kind, FailureKind::Timeout);
    s.step = 1;
    EXPECT_EQ(detect_failure(s)->kind, FailureKind::UnreachableAnchor);
    s.no_path_anchor.reset();
    EXPECT_EQ(detect_failure(s)->kind, FailureKind::AnchorLoop);
    s.targeted.clear();
    EXPECT_EQ(detect_failure(s)->kind, FailureKind::NoValidSubgoal);
}

TEST(RuleOracle, SingleAlternative) {
    const auto g = CoOccurrenceGraph::from_weights({"A", "B", "G"}, {0, 0, .9, 0, 0, .7, .9, .7, 0});
    FailureReport r;
    r.kind = FailureKind::UnreachableAnchor;
    r.anchor = "A";
    r.failed = {"A"};
    const auto p = rule_based_oracle(r, g, "G");
    EXPECT_EQ(p.anchor, "B");
    EXPECT_EQ(p.chain, std::vector<std::string>{"B"});
    EXPECT_DOUBLE_EQ(p.scores.at("B"), 0.7);
    EXPECT_FALSE(p.scores.count("A"));
}

TEST(RuleOracle, Exhausted) {
    const auto g = five();
    FailureReport r;
    r.kind = FailureKind::AnchorLoop;
    r.anchor = "A";
    r.visited = {"B", "C"};
    r.failed = {"A", "D"};
    try {
        rule_based_oracle(r, g, "G");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::RecoveryExhausted);
    }
    EXPECT_THROW(rule_based_oracle(r, g, "X"), Error);
}

TEST(RuleOracle, MatchesBruteForceAndNeverReproposesFailures) {
    Rng rng(21);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = rng.uniform_int(3, 6);
        std::vector<std::string> cats;
        for (int i = 0; i < n; ++i) cats.push_back(std::string(1, static_cast<char>('A' + i)));
        std::vector<double> w(n * n, 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) w[i * n + j] = w[j * n + i] = std::round(rng.uniform() * 20) / 20;
        const auto g = CoOccurrenceGraph::from_weights(cats, w);
        const std::size_t goal = rng.uniform_int(0, n - 1);
        FailureReport r;
        r.kind = FailureKind::UnreachableAnchor;
        std::vector<char> allowed(n, 1);
        allowed[goal] = 0;
        for (int i = 0; i < n; ++i)
            if (i != static_cast<int>(goal) && rng.bernoulli(0.3)) {
                (rng.bernoulli(0.5) ? r.failed : r.visited).push_back(cats[i]);
                allowed[i] = 0;
            }
        const bool any = std::any_of(allowed.begin(), allowed.end(), [](char c) { return c != 0; });
        RelayConfig cfg;
        cfg.max_hops = 2;
        if (!any) {
            EXPECT_THROW(rule_based_oracle(r, g, cats[goal], cfg), Error);
            continue;
        }
        const auto p = rule_based_oracle(r, g, cats[goal], cfg);
        const auto want = oracle::brute_relay_virtual(g, goal, allowed, 2);
        std::vector<std::string> names;
        for (auto a : want.anchors) names.push_back(cats[a]);
        EXPECT_EQ(p.chain, names);
        for (const auto& a : p.chain) {
            EXPECT_EQ(std::count(r.failed.begin(), r.failed.end(), a), 0);
            EXPECT_EQ(std::count(r.visited.begin(), r.visited.end(), a), 0);
        }
    }
}

TEST(FilterProposal, Cases) {
    const std::vector<std::string> cats = {"A", "B", "C", "G"};
    auto grid = open_grid(cats);
    SceneGraph scene;
    scene.add_node(node("A", grid.cell_to_world({10, 10})));
    scene.add_node(node("B", grid.cell_to_world({3, 12})));
    scene.add_node(node("C", grid.cell_to_world({12, 3})));
    const Pose pose{grid.cell_to_world({1, 1}), 0};
    const ValidationConfig vc{0.3, 0.3, ReachConfig{}};
    RecoveryProposal p;
    p.chain = {"A", "B", "C"};
    p.anchor = "A";

    auto out = filter_proposal(p, grid, scene, pose, vc);
    EXPECT_EQ(out.chain, p.chain);

    wall_in(grid, {10, 10});
    out = filter_proposal(p, grid, scene, pose, vc);
    EXPECT_EQ(out.chain, (std::vector<std::string>{"B", "C"}));
    EXPECT_EQ(out.anchor, "B");

    // elementwise oracle: grounding and reachability only
    RecoveryProposal q;
    q.chain = {"G", "C", "A", "B"};
    out = filter_proposal(q, grid, scene, pose, vc);
    std::vector<std::string> want;
    for (const auto& a : q.chain)
        if (validate(Subgoal{Action::Goto, a}, scene, grid, pose, {}, {}, vc)) want.push_back(a);
    EXPECT_EQ(out.chain, want);

    RecoveryProposal none;
    none.chain = {"A", "G"};
    try {
        filter_proposal(none, grid, scene, pose, vc);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::RecoveryExhausted);
    }
}

TEST(SoftReset, PreservesContext) {
    NavigationContext ctx;
    ctx.grid = open_grid({"A", "B"});
    ctx.grid.set_cell({4, 4}, false, true, std::vector<std::string>{"A"});
    ctx.scene.add_node(node("A", {1.1, 1.1}));
    ctx.pose = {{0.6, 0.6}, 1.0};
    ctx.step = 42;
    ctx.chain = {"A"};
    ctx.target = "A";
    ctx.planner.emplace(CostMap::from_grid(ctx.grid, PlannerConfig{}), Cell{2, 2}, Cell{6, 6});
    FailureReport f1;
    f1.anchor = "A";
    ctx.failures.push_back(f1);

    const auto grid_before = ctx.grid;
    const auto nodes_before = ctx.scene.nodes().size();
    RecoveryProposal p;
    p.chain = {"B", "A"};
    soft_reset(ctx, p);
    EXPECT_EQ(ctx.pose.position.x, 0.6);
    EXPECT_EQ(ctx.pose.heading, 1.0);
    EXPECT_EQ(ctx.step, 42);
    EXPECT_FALSE(ctx.planner);
    EXPECT_FALSE(ctx.target);
    EXPECT_EQ(std::vector<std::string>(ctx.chain.begin(), ctx.chain.end()), p.chain);
    EXPECT_EQ(ctx.scene.nodes().size(), nodes_before);
    for (int r = 0; r < ctx.grid.rows(); ++r)
        for (int c = 0; c < ctx.grid.cols(); ++c)
            for (std::size_t ch = 0; ch < ctx.grid.channels(); ++ch)
                ASSERT_EQ(ctx.grid.bit({r, c}, ch), grid_before.bit({r, c}, ch));

    FailureReport f2;
    f2.anchor = "B";
    ctx.failures.push_back(f2);
    soft_reset(ctx, RecoveryProposal{"A", {"A"}, {}, "rule"});
    EXPECT_EQ(ctx.failures.size(), 2u);
    EXPECT_THROW(soft_reset(ctx, RecoveryProposal{}), Error);
}

// ---------------------------------------------------------------- oracle wire protocol

TEST(OracleProtocol, RequestFields) {
    const auto g = five();
    FailureReport r;
    r.kind = FailureKind::UnreachableAnchor;
    r.anchor = "A";
    r.visited = {"B"};
    r.candidates = {"C", "D"};
    r.graph.add_node(node("C", {1, 1}));
    const auto j = make_oracle_request(r, "G");
    EXPECT_EQ(j.at("version"), 1);
    EXPECT_EQ(j.at("goal"), "G");
    EXPECT_EQ(j.at("visited"), json::array({"B"}));
    EXPECT_EQ(j.at("failure_kind"), "unreachable-anchor");
    EXPECT_EQ(j.at("categories"), json::array({"C", "D"}));
    EXPECT_EQ(j.at("graph").at("nodes").size(), 1u);
    EXPECT_TRUE(j.at("graph").contains("edges"));
}

TEST(OracleProtocol, ParseResponse) {
    auto p = parse_oracle_response(json::parse(R"({"anchor":"A","chain":["A","B"],"scores":{"A":0.5}})"));
    EXPECT_EQ(p.anchor, "A");
    EXPECT_EQ(p.chain, (std::vector<std::string>{"A", "B"}));
    EXPECT_DOUBLE_EQ(p.scores.at("A"), 0.5);
    p = parse_oracle_response(json::parse(R"({"anchor":"B"})"));
    EXPECT_EQ(p.chain, std::vector<std::string>{"B"});
    EXPECT_THROW(parse_oracle_response(json::parse(R"({"chain":["A","A"]})")), Error);
    EXPECT_THROW(parse_oracle_response(json::parse(R"({"anchor":"A","scores":{"A":2}})")), Error);
    EXPECT_THROW(parse_oracle_response(json::parse(R"({})")), Error);
    EXPECT_THROW(parse_oracle_response(json::parse(R"([1])")), Error);
}

TEST(OracleProtocol, MakeOracleSpecs) {
    EXPECT_EQ(make_oracle("rule")->name(), "rule");
    EXPECT_EQ(make_oracle("")->name(), "rule");
    EXPECT_EQ(make_oracle("stdio:cat")->name(), "stdio:cat");
    EXPECT_EQ(make_oracle("tcp:localhost:9")->name(), "tcp:localhost:9");
    EXPECT_THROW(make_oracle("tcp:nohost"), Error);
    EXPECT_THROW(make_oracle("smoke-signals"), Error);
}

namespace {

FailureReport simple_report() {
    FailureReport r;
    r.kind = FailureKind::UnreachableAnchor;
    r.anchor = "A";
    r.failed = {"A"};
    r.candidates = {"B", "C", "D"};
    return r;
}

const std::string kFake = FAKE_ORACLE_PATH;

}  // namespace

TEST(StdioOracle, AnswersAndFiltersLikeRule) {
    const auto g = five();
    StdioOracle o(kFake + " echo C", 5000);
    const auto p = o.propose(simple_report(), g, "G", {});
    EXPECT_EQ(p.source, "external");
    EXPECT_EQ(p.anchor, "C");
    EXPECT_TRUE(o.last_error().empty());
    // the persistent child answers a second request too
    EXPECT_EQ(o.propose(simple_report(), g, "G", {}).anchor, "C");

    // both paths go through the same filter contract
    auto grid = open_grid({"A", "B", "C", "D", "G"});
    SceneGraph scene;
    scene.add_node(node("C", grid.cell_to_world({8, 8})));
    scene.add_node(node("B", grid.cell_to_world({4, 4})));
    const Pose pose{grid.cell_to_world({1, 1}), 0};
    const auto rule = rule_based_oracle(simple_report(), g, "G");
    EXPECT_NO_THROW(filter_proposal(p, grid, scene, pose, {0.3, 0.3, ReachConfig{}}));
    EXPECT_NO_THROW(filter_proposal(rule, grid, scene, pose, {0.3, 0.3, ReachConfig{}}));
}

TEST(StdioOracle, FallsBackOnGarbageSilenceAndMissingBinary) {
    const auto g = five();
    const auto rule = rule_based_oracle(simple_report(), g, "G");
    for (const std::string cmd : {kFake + " garbage", kFake + " silent", std::string("/nonexistent/oracle")}) {
        StdioOracle o(cmd, 300);
        const auto p = o.propose(simple_report(), g, "G", {});
        EXPECT_EQ(p.source, "rule-fallback") << cmd;
        EXPECT_EQ(p.chain, rule.chain) << cmd;
        EXPECT_FALSE(o.last_error().empty()) << cmd;
        EXPECT_EQ(o.fallbacks(), 1);
    }
}

TEST(StdioOracle, RequestOnTheWire) {
    char path[] = "/tmp/gridrelay_oracle_XXXXXX";
    const int fd = ::mkstemp(path);
    ASSERT_GE(fd, 0);
    ::close(fd);
    {
        StdioOracle o(kFake + " log " + path, 5000);
        o.propose(simple_report(), five(), "G", {});
    }
    std::ifstream in(path);
    std::string line;
    ASSERT_TRUE(std::getline(in, line));
    const auto j = json::parse(line);
    EXPECT_EQ(j.at("goal"), "G");
    EXPECT_EQ(j.at("failure_kind"), "unreachable-anchor");
    std::remove(path);
}

TEST(TcpOracle, RoundTripAndFallback) {
    const int srv = ::socket(AF_INET, SOCK_STREAM, 0);
    ASSERT_GE(srv, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    ASSERT_EQ(::bind(srv, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
    ASSERT_EQ(::listen(srv, 1), 0);
    socklen_t len = sizeof addr;
    ::getsockname(srv, reinterpret_cast<sockaddr*>(&addr), &len);
    const std::string port = std::to_string(ntohs(addr.sin_port));

    std::thread server([srv] {
        const int c = ::accept(srv, nullptr, nullptr);
        if (c < 0) return;
        std::string buf;
        char tmp[4096];
        while (buf.find('\n') == std::string::npos) {
            const ssize_t n = ::read(c, tmp, sizeof tmp);
            if (n <= 0) break;
            buf.append(tmp, static_cast<std::size_t>(n));
        }
        const std::string reply = R"({"anchor":"D","chain":["D"],"scores":{"D":1.0}})" "\n";
        ::send(c, reply.data(), reply.size(), MSG_NOSIGNAL);
        ::close(c);
    });
    TcpOracle o("127.0.0.1", port, 5000);
    const auto p = o.propose(simple_report(), five(), "G", {});
    server.join();
    ::close(srv);
    EXPECT_EQ(p.source, "external");
    EXPECT_EQ(p.anchor, "D");

    // the server is gone now: fallback
    const auto q = o.propose(simple_report(), five(), "G", {});
    EXPECT_EQ(q.source, "rule-fallback");
}
