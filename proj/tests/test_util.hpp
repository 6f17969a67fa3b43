#pragma once

#include "treefx/models.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

namespace treefx::testing {

inline SamplerConfig short_chain(int trees, int burn, int draws, std::uint64_t seed = 7) {
  SamplerConfig c;
  c.num_trees = trees;
  c.burn_in = burn;
  c.num_draws = draws;
  c.thinning = 1;
  c.seed = seed;
  return c;
}

inline std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("treefx_test_" + name)).string();
}

inline std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path = temp_path(name);
  std::ofstream(path) << content;
  return path;
}

}  // namespace treefx::testing
