// Writes a procedurally generated cluttered map in the text map format.

#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "mcbnav/map_io.hpp"
#include "mcbnav/world.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a cluttered map"};
  std::string name = "cluttered";
  std::string out;
  std::uint64_t seed = 0;
  mcbnav::world::ClutterConfig cfg;
  app.add_option("--name", name);
  app.add_option("--seed", seed);
  app.add_option("--width", cfg.width);
  app.add_option("--height", cfg.height);
  app.add_option("--circles", cfg.circles);
  app.add_option("--boxes", cfg.boxes);
  app.add_option("--min-size", cfg.min_size);
  app.add_option("--max-size", cfg.max_size);
  app.add_option("--gap", cfg.min_gap);
  app.add_option("-o,--out", out)->required();
  CLI11_PARSE(app, argc, argv);
  try {
    mcbnav::world::save_map(mcbnav::world::generate_cluttered_map(name, seed, cfg), out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
