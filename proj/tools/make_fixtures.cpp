// Writes a collection of synthetic root files, e.g. for trying the CLI.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <random>

#include "fixtures.hpp"
#include "treeshape/tree_io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate synthetic two-layer root trees"};
  std::string dir;
  int count = 8;
  std::uint64_t seed = 1;
  bool growth = false;
  app.add_option("dir", dir, "Output directory")->required();
  app.add_option("--count", count)->capture_default_str();
  app.add_option("--seed", seed)->capture_default_str();
  app.add_flag("--growth", growth, "One-parameter growth family instead of random roots");
  CLI11_PARSE(app, argc, argv);

  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> nlat(1, 5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "root%02d", i);
    const auto tree = growth ? treeshape::fixtures::growth_root(count > 1 ? double(i) / (count - 1) : 0.5,
                                                                 u(rng) - 0.5, name)
                             : treeshape::fixtures::random_root(rng, nlat(rng), name, 10.0);
    treeshape::save_root(tree, std::filesystem::path(dir) / (std::string(name) + ".json"));
  }
  std::cout << "wrote " << count << " roots to " << dir << "\n";
  return 0;
}
