#pragma once
// sim_env.hpp - seeded apartment generator (binary space partition rooms with
// doorways, template-driven object placement), sensor and actuation model, and
// the privileged expert used for demonstrations.

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "co_occurrence.hpp"
#include "control_reward.hpp"
#include "core.hpp"
#include "planner.hpp"
#include "raster.hpp"
#include "scene_graph.hpp"
#include "semantic_grid.hpp"
#include "subgoal.hpp"

namespace gridrelay {

enum class SizeClass { Large, Small };

struct CategoryInfo {
    std::string name;
    SizeClass size = SizeClass::Small;
    bool traversable = false;
    bool goal = false;  // eligible as an episode goal
};

struct TemplateItem {
    std::string category;
    double probability = 1.0;
    std::vector<std::string> hosts;  // placed within two cells of one of these when present
};

struct RoomTemplate {
    std::string type;
    std::vector<TemplateItem> items;
};

struct Catalogue {
    std::vector<CategoryInfo> categories;
    std::vector<RoomTemplate> rooms;
    std::vector<std::set<std::string>> synonyms;

    const CategoryInfo& info(const std::string& c) const {
        for (const auto& i : categories)
            if (i.name == c) return i;
        throw Error(ErrorCode::NotFound, "unknown category " + c);
    }
    const RoomTemplate& room(const std::string& type) const {
        for (const auto& r : rooms)
            if (r.type == type) return r;
        throw Error(ErrorCode::NotFound, "unknown room type " + type);
    }
    std::vector<std::string> vocabulary() const {
        std::vector<std::string> v;
        for (const auto& c : categories) v.push_back(c.name);
        std::sort(v.begin(), v.end());
        return v;
    }
    std::set<std::string> traversable() const {
        std::set<std::string> s;
        for (const auto& c : categories)
            if (c.traversable) s.insert(c.name);
        return s;
    }
};

inline Catalogue default_catalogue() {
    using S = SizeClass;
    Catalogue c;
    c.categories = {
        {"AlarmClock", S::Small, false, true}, {"Bathtub", S::Large, false, false},
        {"Bed", S::Large, false, false},       {"Book", S::Small, false, true},
        {"Bookshelf", S::Large, false, false}, {"Chair", S::Large, false, false},
        {"CoffeeTable", S::Large, false, false}, {"Counter", S::Large, false, false},
        {"Desk", S::Large, false, false},      {"DeskLamp", S::Small, false, true},
        {"Dresser", S::Large, false, false},   {"Fridge", S::Large, false, false},
        {"Kettle", S::Small, false, true},     {"Lamp", S::Small, false, true},
        {"Laptop", S::Small, false, true},     {"Microwave", S::Small, false, true},
        {"Mirror", S::Small, false, true},     {"Mug", S::Small, false, true},
        {"Nightstand", S::Large, false, false}, {"Pillow", S::Small, false, true},
        {"Plant", S::Large, false, false},     {"Printer", S::Small, false, true},
        {"Remote", S::Small, false, true},     {"Rug", S::Small, true, false},
        {"Sink", S::Large, false, false},      {"Soap", S::Small, false, true},
        {"Sofa", S::Large, false, false},      {"Stool", S::Small, false, false},
        {"Stove", S::Large, false, false},     {"Table", S::Large, false, false},
        {"Television", S::Large, false, false}, {"Toaster", S::Small, false, true},
        {"Toilet", S::Large, false, false},    {"Towel", S::Small, false, true},
        {"Wardrobe", S::Large, false, false},
    };
    c.rooms = {
        {"kitchen",
         {{"Fridge", 0.9}, {"Stove", 0.85}, {"Counter", 0.8}, {"Sink", 0.6}, {"Table", 0.5}, {"Chair", 0.4},
          {"Stool", 0.4, {"Counter", "Table"}}, {"Kettle", 0.6, {"Stove", "Counter"}}, {"Mug", 0.7, {"Counter", "Table"}},
          {"Microwave", 0.5, {"Counter", "Fridge"}}, {"Toaster", 0.4, {"Counter"}}}},
        {"bedroom",
         {{"Bed", 0.95}, {"Wardrobe", 0.8}, {"Nightstand", 0.7}, {"Dresser", 0.4}, {"Pillow", 0.7, {"Bed"}},
          {"Lamp", 0.5, {"Nightstand", "Dresser"}}, {"Book", 0.3, {"Nightstand"}}, {"Rug", 0.3, {"Bed"}},
          {"AlarmClock", 0.5, {"Nightstand", "Bed"}}}},
        {"office",
         {{"Desk", 0.9}, {"Bookshelf", 0.7}, {"Chair", 0.8}, {"Laptop", 0.7, {"Desk"}}, {"Printer", 0.5, {"Desk"}},
          {"DeskLamp", 0.6, {"Desk"}}, {"Book", 0.6, {"Bookshelf"}}, {"Plant", 0.3}}},
        {"bathroom",
         {{"Toilet", 0.95}, {"Bathtub", 0.7}, {"Sink", 0.9}, {"Towel", 0.7, {"Bathtub", "Sink"}},
          {"Mirror", 0.5, {"Sink"}}, {"Soap", 0.5, {"Sink", "Bathtub"}}}},
        {"living",
         {{"Sofa", 0.95}, {"Television", 0.85}, {"CoffeeTable", 0.7}, {"Plant", 0.5}, {"Lamp", 0.5, {"Sofa"}},
          {"Book", 0.3, {"CoffeeTable"}}, {"Rug", 0.6, {"CoffeeTable", "Sofa"}}, {"Chair", 0.3},
          {"Remote", 0.6, {"CoffeeTable", "Sofa"}}}},
    };
    c.synonyms = {{"Chair", "Stool"}, {"DeskLamp", "Lamp"}};
    return c;
}

struct SensorConfig {
    double fov = kPi / 2.0;
    double range = 8.0;        // m, range scan and large objects
    double small_range = 2.0;  // m, small objects resolve only up close
    int rays = 64;
    double position_noise = 0.05;   // m
    double embedding_noise = 0.05;  // per dimension, before renormalization
};

struct SimConfig {
    double width = 16.0;   // m
    double height = 12.0;  // m
    double step = 0.25;    // m per forward action, also the grid resolution
    int min_rooms = 2, max_rooms = 6;
    int min_objects = 8, max_objects = 30;
    double min_room_size = 3.0;  // m, interior
    int door_width = 2;          // cells
    SensorConfig sensor{};

    void validate() const {
        if (!(step > 0) || !(width > 4 * step) || !(height > 4 * step))
            throw Error(ErrorCode::InvalidParameter, "world extent");
        if (min_rooms < 1 || max_rooms < min_rooms) throw Error(ErrorCode::InvalidParameter, "room range");
        if (min_objects < 0 || max_objects < min_objects) throw Error(ErrorCode::InvalidParameter, "object range");
        if (door_width < 1) throw Error(ErrorCode::InvalidParameter, "door_width");
    }
};

struct Room {
    int row0 = 0, col0 = 0, row1 = 0, col1 = 0;  // inclusive interior bounds
    std::string type;
    bool contains(Cell c) const { return c.row >= row0 && c.row <= row1 && c.col >= col0 && c.col <= col1; }
};

struct Doorway {
    std::vector<Cell> cells;
    int room_a = -1, room_b = -1;
};

struct ObjectInstance {
    std::string category;
    Cell cell{};
    Vec3 position{};
    double facing = 0.0;
    bool traversable = false;
    bool large = false;
    int room = -1;
};

struct Scenario {
    std::uint64_t seed = 0;
    double width = 0, height = 0, step = 0.25;
    GridGeometry geometry{};
    std::vector<char> walls;  // per cell
    std::vector<Room> rooms;
    std::vector<Doorway> doorways;
    std::vector<ObjectInstance> objects;
    std::vector<std::string> vocabulary;
    std::set<std::string> traversable;
    std::vector<std::set<std::string>> synonyms;
    Pose start{};
    std::string goal;
    double shortest_path = 0.0;  // m

    bool wall(Cell c) const { return !geometry.in_bounds(c) || walls[geometry.index(c)]; }

    const ObjectInstance* object_at(Cell c) const {
        for (const auto& o : objects)
            if (o.cell == c) return &o;
        return nullptr;
    }
    bool blocked(Cell c) const {
        if (wall(c)) return true;
        const auto* o = object_at(c);
        return o && !o->traversable;
    }
    int room_of(Cell c) const {
        for (std::size_t i = 0; i < rooms.size(); ++i)
            if (rooms[i].contains(c)) return static_cast<int>(i);
        return -1;
    }
    std::vector<const ObjectInstance*> instances(const std::string& category) const {
        std::vector<const ObjectInstance*> v;
        for (const auto& o : objects)
            if (o.category == category) v.push_back(&o);
        return v;
    }
    std::vector<CategorySet> room_scenes() const {
        std::vector<CategorySet> scenes(rooms.size());
        for (const auto& o : objects)
            if (o.room >= 0) scenes[o.room].insert(o.category);
        return scenes;
    }
    std::uint64_t hash() const;
};

// ---------------------------------------------------------------- ground truth

// Per-cell blocking mask: walls and non-traversable objects.
inline std::vector<char> blocked_mask(const Scenario& s) {
    std::vector<char> m = s.walls;
    for (const auto& o : s.objects)
        if (!o.traversable) m[s.geometry.index(o.cell)] = 1;
    return m;
}

// Shortest-path costs in the planner's units, without clearance shaping.
inline CostMap ground_truth_costs(const Scenario& s, bool eight_connected = false) {
    CostMap m(s.geometry.rows, s.geometry.cols, eight_connected);
    const auto mask = blocked_mask(s);
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) m.set_blocked(m.cell_at(i));
    return m;
}

// Fully known semantic grid (free/obstacle plus category bits).
inline SemanticGrid ground_truth_grid(const Scenario& s) {
    SemanticGrid g(s.geometry, s.vocabulary, s.traversable);
    for (int r = 0; r < s.geometry.rows; ++r)
        for (int c = 0; c < s.geometry.cols; ++c) {
            const Cell cell{r, c};
            std::vector<std::string> cats;
            bool obstacle = s.wall(cell);
            for (const auto& o : s.objects)
                if (o.cell == cell) {
                    cats.push_back(o.category);
                    obstacle = obstacle || !o.traversable;
                }
            g.set_cell(cell, !obstacle, obstacle, cats);
        }
    return g;
}

// Multi-source BFS step counts from the given cells over unblocked cells; the
// sources themselves may be blocked (object cells are entered on arrival).
inline std::vector<int> bfs_steps(const Scenario& s, const std::vector<Cell>& sources) {
    const auto mask = blocked_mask(s);
    std::vector<int> d(s.geometry.size(), -1);
    std::deque<Cell> q;
    for (const Cell c : sources) {
        d[s.geometry.index(c)] = 0;
        q.push_back(c);
    }
    while (!q.empty()) {
        const Cell u = q.front();
        q.pop_front();
        for (const auto& k : kDir4) {
            const Cell v{u.row + k[0], u.col + k[1]};
            if (!s.geometry.in_bounds(v) || mask[s.geometry.index(v)] || d[s.geometry.index(v)] >= 0) continue;
            d[s.geometry.index(v)] = d[s.geometry.index(u)] + 1;
            q.push_back(v);
        }
    }
    return d;
}

// Geodesic distance field (m) to the nearest instance of a category; -1 where unreachable.
inline std::vector<double> goal_distance_field(const Scenario& s, const std::string& category) {
    std::vector<Cell> src;
    for (const auto* o : s.instances(category)) src.push_back(o->cell);
    const auto steps = bfs_steps(s, src);
    std::vector<double> out(steps.size());
    for (std::size_t i = 0; i < steps.size(); ++i) out[i] = steps[i] < 0 ? -1.0 : steps[i] * s.step;
    return out;
}

// A* distance (m) from a cell to the nearest instance of a category, with the
// goal cell itself enterable. Throws no-path when no instance is reachable.
inline double astar_distance_to(const Scenario& s, Cell from, const std::string& category) {
    CostMap m = ground_truth_costs(s);
    m.set_penalty(from, 0);
    std::optional<Cost> best;
    for (const auto* o : s.instances(category)) {
        CostMap mm = m;
        mm.set_penalty(o->cell, 0);
        try {
            const Cost c = astar(mm, from, o->cell).cost_units;
            if (!best || c < *best) best = c;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoPath) throw;
        }
    }
    if (!best) throw Error(ErrorCode::NoPath, "no reachable instance of " + category);
    return static_cast<double>(*best) / kStepCost * s.step;
}

// ---------------------------------------------------------------- generation

namespace detail {

struct Rect {
    int r0, c0, r1, c1;  // inclusive
    int rows() const { return r1 - r0 + 1; }
    int cols() const { return c1 - c0 + 1; }
};

struct Split {
    bool vertical;  // wall is a column
    int at;         // wall row or column
    int lo, hi;     // extent along the wall
};

inline bool connected_free(const GridGeometry& g, const std::vector<char>& mask) {
    std::size_t total = 0, first = mask.size();
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (!mask[i]) {
            ++total;
            if (first == mask.size()) first = i;
        }
    if (total == 0) return true;
    std::vector<char> seen(mask.size(), 0);
    std::deque<std::size_t> q{first};
    seen[first] = 1;
    std::size_t n = 1;
    while (!q.empty()) {
        const Cell u = g.cell_at(q.front());
        q.pop_front();
        for (const auto& k : kDir4) {
            const Cell v{u.row + k[0], u.col + k[1]};
            if (!g.in_bounds(v)) continue;
            const std::size_t vi = g.index(v);
            if (mask[vi] || seen[vi]) continue;
            seen[vi] = 1;
            ++n;
            q.push_back(vi);
        }
    }
    return n == total;
}

inline double quarter_heading(int q) {
    static constexpr double h[4] = {0.0, kPi / 2, -kPi, -kPi / 2};
    return h[((q % 4) + 4) % 4];
}

inline int heading_quarter(double h) { return static_cast<int>(std::lround(wrap_angle(h) / (kPi / 2))); }

}  // namespace detail

// Lays out rooms and objects for a seed. Same seed and config, same scenario.
inline Scenario generate_layout(std::uint64_t seed, const SimConfig& cfg, const Catalogue& cat, int rooms_wanted) {
    cfg.validate();
    Scenario s;
    s.seed = seed;
    s.width = cfg.width;
    s.height = cfg.height;
    s.step = cfg.step;
    s.geometry = {static_cast<int>(std::lround(cfg.height / cfg.step)), static_cast<int>(std::lround(cfg.width / cfg.step)),
                  cfg.step, {0.0, 0.0}};
    const auto& g = s.geometry;
    s.walls.assign(g.size(), 0);
    for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c)
            if (r == 0 || c == 0 || r == g.rows - 1 || c == g.cols - 1) s.walls[g.index({r, c})] = 1;
    s.vocabulary = cat.vocabulary();
    s.traversable = cat.traversable();
    s.synonyms = cat.synonyms;

    Rng layout = make_stream(seed, Stream::Layout);
    const int min_cells = std::max(2, static_cast<int>(std::ceil(cfg.min_room_size / cfg.step)));
    std::vector<detail::Rect> leaves{{1, 1, g.rows - 2, g.cols - 2}};
    std::vector<detail::Split> splits;
    while (static_cast<int>(leaves.size()) < rooms_wanted) {
        int pick = -1;
        for (int i = 0; i < static_cast<int>(leaves.size()); ++i) {
            const auto& L = leaves[i];
            const bool can = L.rows() >= 2 * min_cells + 1 || L.cols() >= 2 * min_cells + 1;
            if (can && (pick < 0 || L.rows() * L.cols() > leaves[pick].rows() * leaves[pick].cols())) pick = i;
        }
        if (pick < 0) throw Error(ErrorCode::GenerationFailed, "world too small for the requested room count");
        const detail::Rect L = leaves[pick];
        const bool can_v = L.cols() >= 2 * min_cells + 1, can_h = L.rows() >= 2 * min_cells + 1;
        bool vertical = can_v && (!can_h || L.cols() > L.rows() || (L.cols() == L.rows() && layout.bernoulli(0.5)));
        detail::Split sp;
        sp.vertical = vertical;
        if (vertical) {
            sp.at = layout.uniform_int(L.c0 + min_cells, L.c1 - min_cells);
            sp.lo = L.r0, sp.hi = L.r1;
            leaves[pick] = {L.r0, L.c0, L.r1, sp.at - 1};
            leaves.push_back({L.r0, sp.at + 1, L.r1, L.c1});
            for (int r = L.r0; r <= L.r1; ++r) s.walls[g.index({r, sp.at})] = 1;
        } else {
            sp.at = layout.uniform_int(L.r0 + min_cells, L.r1 - min_cells);
            sp.lo = L.c0, sp.hi = L.c1;
            leaves[pick] = {L.r0, L.c0, sp.at - 1, L.c1};
            leaves.push_back({sp.at + 1, L.c0, L.r1, L.c1});
            for (int c = L.c0; c <= L.c1; ++c) s.walls[g.index({sp.at, c})] = 1;
        }
        splits.push_back(sp);
    }
    for (const auto& L : leaves) s.rooms.push_back({L.r0, L.c0, L.r1, L.c1, ""});

    // one doorway per split wall keeps the room graph connected
    for (const auto& sp : splits) {
        std::vector<int> options;
        for (int i = sp.lo; i + cfg.door_width - 1 <= sp.hi; ++i) {
            bool ok = true;
            for (int k = 0; k < cfg.door_width && ok; ++k) {
                const int along = i + k;
                const Cell a = sp.vertical ? Cell{along, sp.at - 1} : Cell{sp.at - 1, along};
                const Cell b = sp.vertical ? Cell{along, sp.at + 1} : Cell{sp.at + 1, along};
                ok = !s.wall(a) && !s.wall(b);
            }
            if (ok) options.push_back(i);
        }
        if (options.empty()) throw Error(ErrorCode::GenerationFailed, "no doorway position on a split wall");
        const int i = options[layout.uniform_int(0, static_cast<int>(options.size()) - 1)];
        Doorway d;
        for (int k = 0; k < cfg.door_width; ++k) {
            const int along = i + k;
            const Cell c = sp.vertical ? Cell{along, sp.at} : Cell{sp.at, along};
            s.walls[g.index(c)] = 0;
            d.cells.push_back(c);
        }
        const Cell a = sp.vertical ? Cell{i, sp.at - 1} : Cell{sp.at - 1, i};
        const Cell b = sp.vertical ? Cell{i, sp.at + 1} : Cell{sp.at + 1, i};
        d.room_a = s.room_of(a);
        d.room_b = s.room_of(b);
        s.doorways.push_back(std::move(d));
    }

    // room types: each base type once, extra rooms are bedrooms or offices
    std::vector<std::string> types;
    for (const auto& t : cat.rooms) types.push_back(t.type);
    for (std::size_t i = types.size(); i > 1; --i) std::swap(types[i - 1], types[layout.uniform_int(0, static_cast<int>(i) - 1)]);
    for (std::size_t i = 0; i < s.rooms.size(); ++i)
        s.rooms[i].type = i < types.size() ? types[i] : (layout.bernoulli(0.5) ? "bedroom" : "office");
    return s;
}

inline void place_objects(Scenario& s, const SimConfig& cfg, const Catalogue& cat) {
    Rng rng = make_stream(s.seed, Stream::Placement);
    struct Want {
        std::string category;
        int room;
        std::vector<std::string> hosts;
    };
    std::vector<Want> wants;
    for (int r = 0; r < static_cast<int>(s.rooms.size()); ++r)
        for (const auto& item : cat.room(s.rooms[r].type).items)
            if (rng.bernoulli(item.probability)) wants.push_back({item.category, r, item.hosts});
    const int target = rng.uniform_int(cfg.min_objects, cfg.max_objects);
    while (static_cast<int>(wants.size()) > target) wants.erase(wants.begin() + rng.uniform_int(0, static_cast<int>(wants.size()) - 1));
    while (static_cast<int>(wants.size()) < cfg.min_objects) {
        const int r = rng.uniform_int(0, static_cast<int>(s.rooms.size()) - 1);
        const auto& items = cat.room(s.rooms[r].type).items;
        const auto& item = items[rng.uniform_int(0, static_cast<int>(items.size()) - 1)];
        wants.push_back({item.category, r, item.hosts});
    }

    if (std::none_of(wants.begin(), wants.end(), [&](const Want& w) { return cat.info(w.category).goal; })) {
        const int r = rng.uniform_int(0, static_cast<int>(s.rooms.size()) - 1);
        std::vector<const TemplateItem*> goals;
        for (const auto& item : cat.room(s.rooms[r].type).items)
            if (cat.info(item.category).goal) goals.push_back(&item);
        if (!goals.empty()) {
            const TemplateItem* it = goals[rng.uniform_int(0, static_cast<int>(goals.size()) - 1)];
            const Want w{it->category, r, it->hosts};
            if (static_cast<int>(wants.size()) >= cfg.max_objects && !wants.empty()) wants.back() = w;
            else wants.push_back(w);
        }
    }

    const auto& g = s.geometry;
    std::vector<char> mask = s.walls;
    std::vector<char> taken(g.size(), 0);
    auto near_door = [&](Cell c) {
        for (const auto& d : s.doorways)
            for (const Cell dc : d.cells)
                if (std::abs(dc.row - c.row) <= 1 && std::abs(dc.col - c.col) <= 1) return true;
        return false;
    };
    // furniture first so that small items can find their hosts
    std::stable_sort(wants.begin(), wants.end(), [&](const Want& a, const Want& b) {
        return cat.info(a.category).size == SizeClass::Large && cat.info(b.category).size != SizeClass::Large;
    });
    for (const auto& w : wants) {
        const auto& info = cat.info(w.category);
        const Room& room = s.rooms[w.room];
        std::vector<Cell> hosts;
        for (const auto& o : s.objects)
            if (o.room == w.room && std::find(w.hosts.begin(), w.hosts.end(), o.category) != w.hosts.end())
                hosts.push_back(o.cell);
        std::vector<Cell> options;
        for (int pass = hosts.empty() ? 1 : 0; pass < 2 && options.empty(); ++pass)
            for (int r = room.row0; r <= room.row1; ++r)
                for (int c = room.col0; c <= room.col1; ++c) {
                    const Cell cell{r, c};
                    if (taken[g.index(cell)] || near_door(cell)) continue;
                    const bool edge = r == room.row0 || r == room.row1 || c == room.col0 || c == room.col1;
                    if (info.size == SizeClass::Large && !edge) continue;  // furniture stands against walls
                    if (pass == 0 && std::none_of(hosts.begin(), hosts.end(), [&](Cell h) {
                            return std::max(std::abs(h.row - r), std::abs(h.col - c)) <= 2;
                        }))
                        continue;
                    options.push_back(cell);
                }
        bool placed = false;
        for (int attempt = 0; attempt < 40 && !options.empty() && !placed; ++attempt) {
            const std::size_t k = rng.uniform_int(0, static_cast<int>(options.size()) - 1);
            const Cell cell = options[k];
            options.erase(options.begin() + static_cast<std::ptrdiff_t>(k));
            if (!info.traversable) {
                mask[g.index(cell)] = 1;
                if (!detail::connected_free(g, mask)) {
                    mask[g.index(cell)] = 0;
                    continue;
                }
            }
            taken[g.index(cell)] = 1;
            ObjectInstance o;
            o.category = w.category;
            o.cell = cell;
            const Vec2 p = g.cell_center(cell);
            o.large = info.size == SizeClass::Large;
            o.position = {p.x, p.y, o.large ? 0.5 : (info.traversable ? 0.0 : 0.8)};
            o.facing = detail::quarter_heading(rng.uniform_int(0, 3));
            o.traversable = info.traversable;
            o.room = w.room;
            s.objects.push_back(std::move(o));
            placed = true;
        }
    }
    if (static_cast<int>(s.objects.size()) < cfg.min_objects)
        throw Error(ErrorCode::GenerationFailed, "too many objects for the available area");
}

inline std::uint64_t Scenario::hash() const {
    std::string b;
    auto put = [&](const void* p, std::size_t n) { b.append(static_cast<const char*>(p), n); };
    put(&seed, sizeof seed);
    put(walls.data(), walls.size());
    for (const auto& r : rooms) {
        put(&r, 4 * sizeof(int));
        b += r.type;
    }
    for (const auto& o : objects) {
        b += o.category;
        put(&o.cell, sizeof o.cell);
        put(&o.position, sizeof o.position);
        put(&o.facing, sizeof o.facing);
    }
    put(&start, sizeof start);
    b += goal;
    put(&shortest_path, sizeof shortest_path);
    return fnv1a64(b);
}

// Room count is drawn from [min_rooms, max_rooms]; start and goal from the task stream.
inline Scenario generate(std::uint64_t seed, const SimConfig& cfg = {}, const Catalogue& cat = default_catalogue()) {
    Rng task = make_stream(seed, Stream::Task);
    const int rooms = task.uniform_int(cfg.min_rooms, cfg.max_rooms);
    Scenario s = generate_layout(seed, cfg, cat, rooms);
    place_objects(s, cfg, cat);

    std::set<std::string> goals;
    for (const auto& o : s.objects)
        if (cat.info(o.category).goal) goals.insert(o.category);
    if (goals.empty()) throw Error(ErrorCode::GenerationFailed, "no goal-eligible object placed");
    std::vector<std::string> goal_list(goals.begin(), goals.end());

    const auto mask = blocked_mask(s);
    std::vector<Cell> free_cells;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (!mask[i] && s.room_of(s.geometry.cell_at(i)) >= 0) free_cells.push_back(s.geometry.cell_at(i));
    for (int attempt = 0; attempt < 100; ++attempt) {
        const Cell sc = free_cells[task.uniform_int(0, static_cast<int>(free_cells.size()) - 1)];
        const std::string goal = goal_list[task.uniform_int(0, static_cast<int>(goal_list.size()) - 1)];
        const double facing = detail::quarter_heading(task.uniform_int(0, 3));
        try {
            const double ell = astar_distance_to(s, sc, goal);
            if (!(ell > 0)) continue;
            s.start = {s.geometry.cell_center(sc), facing};
            s.goal = goal;
            s.shortest_path = ell;
            return s;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoPath) throw;
        }
    }
    throw Error(ErrorCode::GenerationFailed, "no reachable start/goal pair");
}

// ---------------------------------------------------------------- sensing

struct Detection {
    std::string category;
    Vec2 position{};
    Vec3 position3{};
    Embedding embedding;
    double confidence = 0.0;
    double facing = 0.0;
    double range = 0.0;  // true distance, for diagnostics
};

struct Observation {
    std::vector<double> ray_angles;
    std::vector<double> ray_distances;
    std::vector<bool> ray_hits;
    RangeScan scan;
    std::vector<Detection> detections;
    Pose pose{};
};

struct RayHit {
    double distance = 0.0;
    bool hit = false;
    Cell cell{};
};

// Distance from p along heading to the first blocked cell boundary, capped at range.
template <class Blocked>
RayHit raycast(const GridGeometry& g, Vec2 p, double angle, double range, Blocked&& blocked) {
    const Vec2 end{p.x + range * std::cos(angle), p.y + range * std::sin(angle)};
    const double ax = (p.x - g.origin.x) / g.resolution, ay = (p.y - g.origin.y) / g.resolution;
    const double dx = (end.x - p.x) / g.resolution, dy = (end.y - p.y) / g.resolution;
    RayHit out{range, false, g.cell_of(end)};
    traverse_segment(g, p, end, [&](Cell c) {
        if (!g.in_bounds(c) || blocked(c)) {
            // entry parameter of the cell along the segment
            double t = 0.0;
            if (dx > 0) t = std::max(t, (c.col - ax) / dx);
            else if (dx < 0) t = std::max(t, (c.col + 1 - ax) / dx);
            if (dy > 0) t = std::max(t, (c.row - ay) / dy);
            else if (dy < 0) t = std::max(t, (c.row + 1 - ay) / dy);
            out = {std::clamp(t, 0.0, 1.0) * range, true, c};
            return false;
        }
        return true;
    });
    return out;
}

// Line of sight between two points, blocked by walls and by large solid objects
// other than at the endpoints.
inline bool line_of_sight(const Scenario& s, Vec2 from, Vec2 to, const std::vector<char>& occluders) {
    const Cell a = s.geometry.cell_of(from), b = s.geometry.cell_of(to);
    return traverse_segment(s.geometry, from, to, [&](Cell c) {
        if (c == a || c == b) return true;
        return s.geometry.in_bounds(c) && !occluders[s.geometry.index(c)];
    });
}

inline std::vector<char> occluder_mask(const Scenario& s) {
    std::vector<char> m = s.walls;
    for (const auto& o : s.objects)
        if (o.large && !o.traversable) m[s.geometry.index(o.cell)] = 1;
    return m;
}

inline double detection_range(const ObjectInstance& o, const SensorConfig& cfg) {
    return o.large ? cfg.range : std::min(cfg.range, cfg.small_range);
}

// Detection confidence falls linearly from 1 at the sensor to 0.5 at the range limit.
inline double detection_confidence(double dist, double range) { return 1.0 - 0.5 * std::clamp(dist / range, 0.0, 1.0); }

// Precomputed masks for repeated sensing in one scenario.
class Sensor {
public:
    Sensor(const Scenario& s, SensorConfig cfg) : s_(&s), cfg_(cfg), blocked_(blocked_mask(s)), occ_(occluder_mask(s)) {}

    const SensorConfig& config() const { return cfg_; }

    bool visible(const ObjectInstance& o, Vec2 from, bool check_fov, double heading) const {
        const Vec2 p = o.position.xy();
        const double d = distance(from, p);
        if (d > detection_range(o, cfg_)) return false;
        if (check_fov && d > 1e-12 && angle_between(std::atan2(p.y - from.y, p.x - from.x), heading) > 0.5 * cfg_.fov + 1e-9)
            return false;
        return line_of_sight(*s_, from, p, occ_);
    }

    Observation observe(const Pose& pose, Rng& noise, Rng& embed) const {
        const auto& g = s_->geometry;
        const Cell pc = g.cell_of(pose.position);
        if (!g.in_bounds(pc) || blocked_[g.index(pc)]) throw Error(ErrorCode::InvalidPose, "pose inside an obstacle");
        Observation ob;
        ob.pose = pose;
        const int n = cfg_.rays;
        for (int i = 0; i < n; ++i) {
            const double a = n == 1 ? pose.heading : pose.heading - 0.5 * cfg_.fov + cfg_.fov * i / (n - 1);
            const RayHit h = raycast(g, pose.position, a, cfg_.range, [&](Cell c) { return blocked_[g.index(c)] != 0; });
            ob.ray_angles.push_back(a);
            ob.ray_distances.push_back(h.distance);
            ob.ray_hits.push_back(h.hit);
            // nudge hit endpoints just inside the blocking cell
            const double len = h.hit ? h.distance + 1e-6 * g.resolution : h.distance;
            Vec2 e{pose.position.x + len * std::cos(a), pose.position.y + len * std::sin(a)};
            ob.scan.endpoints.push_back(e);
            ob.scan.hits.push_back(h.hit);
        }
        for (const auto& o : s_->objects) {
            if (!visible(o, pose.position, true, pose.heading)) continue;
            Detection d;
            d.category = o.category;
            d.range = distance(pose.position, o.position.xy());
            d.position = {o.position.x + noise.normal(0.0, cfg_.position_noise),
                          o.position.y + noise.normal(0.0, cfg_.position_noise)};
            d.position3 = {d.position.x, d.position.y, o.position.z};
            d.embedding = label_embedding(o.category);
            for (double& v : d.embedding) v += embed.normal(0.0, cfg_.embedding_noise);
            normalize(d.embedding);
            d.confidence = detection_confidence(d.range, detection_range(o, cfg_));
            d.facing = o.facing;
            ob.detections.push_back(std::move(d));
        }
        return ob;
    }

private:
    const Scenario* s_;
    SensorConfig cfg_;
    std::vector<char> blocked_, occ_;
};

inline Observation observe(const Scenario& s, const Pose& pose, const SensorConfig& cfg, Rng& noise, Rng& embed) {
    return Sensor(s, cfg).observe(pose, noise, embed);
}

inline std::vector<SceneNode> to_scene_nodes(const Observation& ob) {
    std::vector<SceneNode> out;
    for (const auto& d : ob.detections) {
        SceneNode n;
        n.label = d.category;
        n.embedding = d.embedding;
        n.position = d.position3;
        n.bbox = Box3::centered(d.position3, {0.15, 0.15, 0.15});
        n.confidence = d.confidence;
        n.facing = d.facing;
        out.push_back(std::move(n));
    }
    return out;
}

inline std::vector<GridDetection> to_grid_detections(const Observation& ob) {
    std::vector<GridDetection> out;
    for (const auto& d : ob.detections) out.push_back({d.category, d.position});
    return out;
}

// ---------------------------------------------------------------- actuation

struct ActResult {
    Pose pose{};
    bool collided = false;
};

inline ActResult act(const Scenario& s, const Pose& pose, Primitive a) {
    ActResult r{pose, false};
    const int q = detail::heading_quarter(pose.heading);
    switch (a) {
        case Primitive::TurnLeft: r.pose.heading = detail::quarter_heading(q + 1); break;
        case Primitive::TurnRight: r.pose.heading = detail::quarter_heading(q - 1); break;
        case Primitive::Forward: {
            static constexpr int dc[4] = {1, 0, -1, 0}, dr[4] = {0, 1, 0, -1};
            const int k = ((q % 4) + 4) % 4;
            const Vec2 next{pose.position.x + dc[k] * s.step, pose.position.y + dr[k] * s.step};
            if (s.blocked(s.geometry.cell_of(next))) r.collided = true;
            else r.pose.position = next;
            break;
        }
        case Primitive::Interact:
        case Primitive::Stop: break;
    }
    return r;
}

// ---------------------------------------------------------------- expert

// Ground-truth relay graph of one scenario: categories sharing a room are linked
// with weight 1 / (1 + d), d the closest instance pair in metres.
inline CoOccurrenceGraph scenario_relay_graph(const Scenario& s) {
    std::vector<std::string> cats;
    for (const auto& o : s.objects)
        if (std::find(cats.begin(), cats.end(), o.category) == cats.end()) cats.push_back(o.category);
    const std::size_t n = cats.size();
    std::vector<double> w(n * n, 0.0);
    auto at = [&](const std::string& c) { return static_cast<std::size_t>(std::find(cats.begin(), cats.end(), c) - cats.begin()); };
    for (const auto& a : s.objects)
        for (const auto& b : s.objects) {
            if (a.category == b.category || a.room != b.room || a.room < 0) continue;
            const double v = 1.0 / (1.0 + distance(a.position.xy(), b.position.xy()));
            double& x = w[at(a.category) * n + at(b.category)];
            x = std::max(x, v);
        }
    return CoOccurrenceGraph::from_weights(cats, w);
}

// Privileged demonstration: if the goal can be seen from the start (any heading)
// the agent heads straight for it; otherwise it relays through the best
// ground-truth chain over reachable objects sharing a room with the goal.
inline Demonstration expert_demonstration(const Scenario& s, const RelayConfig& relay = {},
                                          const SensorConfig& sensor = {}) {
    const auto& g = s.geometry;
    const Cell start = g.cell_of(s.start.position);
    const auto to_goal = goal_distance_field(s, s.goal);
    if (to_goal[g.index(start)] < 0) throw Error(ErrorCode::NoDemo, "goal unreachable on ground truth");
    const Demonstration direct{s.goal, {{Action::Goto, s.goal}, {Action::Interact, s.goal}}};

    const Sensor sense(s, sensor);
    for (const auto* o : s.instances(s.goal))
        if (sense.visible(*o, s.start.position, false, 0.0)) return direct;

    const auto from_start = bfs_steps(s, {start});
    const auto mask = blocked_mask(s);
    auto reachable_object = [&](const ObjectInstance& o) {
        if (!mask[g.index(o.cell)]) return from_start[g.index(o.cell)] >= 0;
        for (const auto& k : kDir4) {
            const Cell n{o.cell.row + k[0], o.cell.col + k[1]};
            if (g.in_bounds(n) && !mask[g.index(n)] && from_start[g.index(n)] >= 0) return true;
        }
        return false;
    };
    const CoOccurrenceGraph rg = scenario_relay_graph(s);
    std::vector<char> allowed(rg.size(), 0);
    bool any = false;
    const std::size_t gi = *rg.index_of(s.goal);
    for (const auto& o : s.objects)
        if (o.category != s.goal && rg.weight(*rg.index_of(o.category), gi) > 0 && reachable_object(o)) {
            allowed[*rg.index_of(o.category)] = 1;
            any = true;
        }
    if (!any || relay.max_hops < 1) return direct;
    const RelayChain chain = best_relay_chain(rg, RelaySearch{std::nullopt, gi, allowed, 1}, relay);
    if (!(chain.mean_weight > 0)) return direct;

    Demonstration demo{s.goal, {}};
    for (const auto& a : chain.anchors) demo.subgoals.push_back({Action::Goto, a});
    demo.subgoals.push_back({Action::Goto, s.goal});
    demo.subgoals.push_back({Action::Interact, s.goal});
    return demo;
}

}  // namespace gridrelay
