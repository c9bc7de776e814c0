#include "mcbnav/map_io.hpp"

#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

namespace mcbnav::world {
namespace {

std::vector<double> read_numbers(std::istringstream& ls, int line_no) {
  std::vector<double> values;
  std::string token;
  while (ls >> token) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size()) {
      throw MapError("line " + std::to_string(line_no) + ": expected a number, got '" + token +
                     "'");
    }
    values.push_back(v);
  }
  return values;
}

}  // namespace

WorldMap parse_map(const std::string& text, const std::string& default_name) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::string name = default_name;
  std::optional<Bounds> bounds;
  double margin = 0.05;
  std::vector<Circle> circles;
  std::vector<Polygon> polygons;

  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string keyword;
    if (!(ls >> keyword)) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";

    if (keyword == "name") {
      if (!(ls >> name)) throw MapError(where + "name needs a value");
      continue;
    }
    const std::vector<double> v = read_numbers(ls, line_no);
    if (keyword == "bounds") {
      if (v.size() != 4) throw MapError(where + "bounds takes 4 numbers");
      bounds = Bounds{v[0], v[1], v[2], v[3]};
    } else if (keyword == "margin") {
      if (v.size() != 1) throw MapError(where + "margin takes 1 number");
      margin = v[0];
    } else if (keyword == "circle") {
      if (!bounds) throw MapError(where + "circle before bounds");
      if (v.size() != 3) throw MapError(where + "circle takes 3 numbers");
      circles.push_back({Vec2(v[0], v[1]), v[2]});
    } else if (keyword == "polygon") {
      if (!bounds) throw MapError(where + "polygon before bounds");
      if (v.size() < 6 || v.size() % 2 != 0) {
        throw MapError(where + "polygon takes an even count of at least 6 numbers");
      }
      Polygon poly;
      for (std::size_t i = 0; i < v.size(); i += 2) poly.vertices.emplace_back(v[i], v[i + 1]);
      polygons.push_back(std::move(poly));
    } else {
      throw MapError(where + "unknown directive '" + keyword + "'");
    }
  }
  if (!bounds) throw MapError("map has no bounds directive");
  return WorldMap(name, *bounds, std::move(circles), std::move(polygons), margin);
}

WorldMap load_map(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw MapError("cannot open map file '" + path + "'");
  std::stringstream buf;
  buf << f.rdbuf();
  std::string stem = path;
  if (auto slash = stem.find_last_of('/'); slash != std::string::npos) stem.erase(0, slash + 1);
  if (auto dot = stem.find_last_of('.'); dot != std::string::npos) stem.erase(dot);
  return parse_map(buf.str(), stem);
}

std::string format_map(const WorldMap& map) {
  std::ostringstream os;
  os << std::setprecision(17);
  const Bounds& b = map.bounds();
  os << "name " << map.name() << "\n";
  os << "bounds " << b.min_x << " " << b.min_y << " " << b.max_x << " " << b.max_y << "\n";
  os << "margin " << map.margin() << "\n";
  for (const Circle& c : map.circles()) {
    os << "circle " << c.center.x() << " " << c.center.y() << " " << c.radius << "\n";
  }
  for (const Polygon& p : map.polygons()) {
    os << "polygon";
    for (const Vec2& v : p.vertices) os << " " << v.x() << " " << v.y();
    os << "\n";
  }
  return os.str();
}

void save_map(const WorldMap& map, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw MapError("cannot write map file '" + path + "'");
  f << format_map(map);
}

nlohmann::json scenario_to_json(const Scenario& s) {
  return {{"map", s.map_ref},
          {"start", {s.start.x, s.start.y, s.start.theta}},
          {"goal", {s.goal.x(), s.goal.y()}}};
}

Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  s.map_ref = j.at("map").get<std::string>();
  const auto& st = j.at("start");
  s.start = {st.at(0).get<double>(), st.at(1).get<double>(), st.at(2).get<double>()};
  s.goal = Vec2(j.at("goal").at(0).get<double>(), j.at("goal").at(1).get<double>());
  return s;
}

void write_scenarios_jsonl(std::ostream& os, const std::vector<Scenario>& scenarios) {
  for (const Scenario& s : scenarios) os << scenario_to_json(s).dump() << "\n";
}

std::vector<Scenario> read_scenarios_jsonl(std::istream& is) {
  std::vector<Scenario> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    out.push_back(scenario_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

nlohmann::json map_to_json(const WorldMap& map) {
  const Bounds& b = map.bounds();
  nlohmann::json j;
  j["name"] = map.name();
  j["bounds"] = {b.min_x, b.min_y, b.max_x, b.max_y};
  j["circles"] = nlohmann::json::array();
  for (const Circle& c : map.circles()) j["circles"].push_back({c.center.x(), c.center.y(), c.radius});
  j["polygons"] = nlohmann::json::array();
  for (const Polygon& p : map.polygons()) {
    nlohmann::json verts = nlohmann::json::array();
    for (const Vec2& v : p.vertices) verts.push_back({v.x(), v.y()});
    j["polygons"].push_back(verts);
  }
  return j;
}

}  // namespace mcbnav::world
