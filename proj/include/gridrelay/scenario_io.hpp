#pragma once
// scenario_io.hpp - versioned JSON form of a Scenario (see docs/scenario_schema.md).

#include <istream>
#include <ostream>
#include <string>

#include "json.hpp"
#include "sim_env.hpp"

namespace gridrelay {

inline constexpr const char* kScenarioSchema = "SCENARIO v1";

inline nlohmann::json scenario_to_json(const Scenario& s) {
    using nlohmann::json;
    json rooms = json::array(), doors = json::array(), objects = json::array(), walls = json::array();
    for (const auto& r : s.rooms)
        rooms.push_back({{"type", r.type}, {"rows", {r.row0, r.row1}}, {"cols", {r.col0, r.col1}}});
    for (const auto& d : s.doorways) {
        json cells = json::array();
        for (const Cell c : d.cells) cells.push_back({c.row, c.col});
        doors.push_back({{"cells", cells}, {"rooms", {d.room_a, d.room_b}}});
    }
    for (const auto& o : s.objects)
        objects.push_back({{"category", o.category},
                           {"cell", {o.cell.row, o.cell.col}},
                           {"position", {o.position.x, o.position.y, o.position.z}},
                           {"facing", o.facing},
                           {"traversable", o.traversable},
                           {"large", o.large},
                           {"room", o.room}});
    for (int r = 0; r < s.geometry.rows; ++r) {
        std::string row;
        for (int c = 0; c < s.geometry.cols; ++c) row += s.walls[s.geometry.index({r, c})] ? '#' : '.';
        walls.push_back(row);
    }
    json syn = json::array();
    for (const auto& g : s.synonyms) syn.push_back(std::vector<std::string>(g.begin(), g.end()));
    return {{"schema", kScenarioSchema},
            {"seed", s.seed},
            {"world", {{"width", s.width}, {"height", s.height}, {"step", s.step}}},
            {"grid", {{"rows", s.geometry.rows}, {"cols", s.geometry.cols}, {"resolution", s.geometry.resolution}}},
            {"walls", walls},
            {"rooms", rooms},
            {"doorways", doors},
            {"objects", objects},
            {"vocabulary", s.vocabulary},
            {"traversable", std::vector<std::string>(s.traversable.begin(), s.traversable.end())},
            {"synonyms", syn},
            {"start", {{"x", s.start.position.x}, {"y", s.start.position.y}, {"heading", s.start.heading}}},
            {"goal", s.goal},
            {"shortest_path", s.shortest_path}};
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema").get<std::string>() != kScenarioSchema)
            throw Error(ErrorCode::InvalidInput, "unsupported scenario schema");
        Scenario s;
        s.seed = j.at("seed").get<std::uint64_t>();
        s.width = j.at("world").at("width").get<double>();
        s.height = j.at("world").at("height").get<double>();
        s.step = j.at("world").at("step").get<double>();
        s.geometry = {j.at("grid").at("rows").get<int>(), j.at("grid").at("cols").get<int>(),
                      j.at("grid").at("resolution").get<double>(), {0.0, 0.0}};
        const auto& walls = j.at("walls");
        if (static_cast<int>(walls.size()) != s.geometry.rows) throw Error(ErrorCode::InvalidInput, "wall rows");
        s.walls.assign(s.geometry.size(), 0);
        for (int r = 0; r < s.geometry.rows; ++r) {
            const auto row = walls[r].get<std::string>();
            if (static_cast<int>(row.size()) != s.geometry.cols) throw Error(ErrorCode::InvalidInput, "wall cols");
            for (int c = 0; c < s.geometry.cols; ++c) s.walls[s.geometry.index({r, c})] = row[c] == '#';
        }
        for (const auto& r : j.at("rooms"))
            s.rooms.push_back({r.at("rows")[0].get<int>(), r.at("cols")[0].get<int>(), r.at("rows")[1].get<int>(),
                               r.at("cols")[1].get<int>(), r.at("type").get<std::string>()});
        for (const auto& d : j.at("doorways")) {
            Doorway dw;
            for (const auto& c : d.at("cells")) dw.cells.push_back({c[0].get<int>(), c[1].get<int>()});
            dw.room_a = d.at("rooms")[0].get<int>();
            dw.room_b = d.at("rooms")[1].get<int>();
            s.doorways.push_back(std::move(dw));
        }
        for (const auto& o : j.at("objects")) {
            ObjectInstance x;
            x.category = o.at("category").get<std::string>();
            x.cell = {o.at("cell")[0].get<int>(), o.at("cell")[1].get<int>()};
            x.position = {o.at("position")[0].get<double>(), o.at("position")[1].get<double>(),
                          o.at("position")[2].get<double>()};
            x.facing = o.at("facing").get<double>();
            x.traversable = o.at("traversable").get<bool>();
            x.large = o.at("large").get<bool>();
            x.room = o.at("room").get<int>();
            if (!s.geometry.in_bounds(x.cell)) throw Error(ErrorCode::InvalidInput, "object outside the grid");
            s.objects.push_back(std::move(x));
        }
        s.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
        for (const auto& t : j.at("traversable")) s.traversable.insert(t.get<std::string>());
        for (const auto& g : j.at("synonyms")) {
            std::set<std::string> grp;
            for (const auto& c : g) grp.insert(c.get<std::string>());
            s.synonyms.push_back(std::move(grp));
        }
        s.start = {{j.at("start").at("x").get<double>(), j.at("start").at("y").get<double>()},
                   j.at("start").at("heading").get<double>()};
        s.goal = j.at("goal").get<std::string>();
        s.shortest_path = j.at("shortest_path").get<double>();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidInput, std::string("scenario json: ") + e.what());
    }
}

inline void write_scenario(std::ostream& os, const Scenario& s) { os << scenario_to_json(s).dump(1) << '\n'; }

inline Scenario read_scenario(std::istream& is) {
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidInput, std::string("scenario json: ") + e.what());
    }
    return scenario_from_json(j);
}

}  // namespace gridrelay
