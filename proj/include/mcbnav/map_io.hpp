#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "mcbnav/world.hpp"

namespace mcbnav::world {

// Map text format, one directive per line, '#' starts a comment:
//
//   name     <identifier>
//   bounds   <min_x> <min_y> <max_x> <max_y>
//   margin   <meters>
//   circle   <cx> <cy> <radius>
//   polygon  <x1> <y1> <x2> <y2> <x3> <y3> ...
//
// `bounds` is required and must precede obstacles. All values are meters.

/// Parses map text. Throws MapError with a line number on malformed input.
WorldMap parse_map(const std::string& text, const std::string& default_name = "map");
WorldMap load_map(const std::string& path);
std::string format_map(const WorldMap& map);
void save_map(const WorldMap& map, const std::string& path);

nlohmann::json scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& j);

/// One JSON object per line.
void write_scenarios_jsonl(std::ostream& os, const std::vector<Scenario>& scenarios);
std::vector<Scenario> read_scenarios_jsonl(std::istream& is);

nlohmann::json map_to_json(const WorldMap& map);

}  // namespace mcbnav::world
