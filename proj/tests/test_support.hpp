#pragma once

// Fixtures shared by the unit tests and the acceptance binary.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "cvl/grid.hpp"
#include "cvl/harness/rng.hpp"
#include "cvl/pyramid.hpp"

namespace cvl::test {

inline Grid random_grid(int h, int w, int c, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng(seed);
  Grid g(h, w, c);
  for (float& x : g.data()) x = static_cast<float>(rng.uniform(lo, hi));
  return g;
}

/// Levels of the given heights (width = 2 * height), random features and confidences.
inline FeaturePyramid random_pyramid(const std::vector<int>& heights, int channels, std::uint64_t seed) {
  FeaturePyramid pyr;
  std::uint64_t s = seed;
  for (int h : heights)
    pyr.levels.push_back({random_grid(h, 2 * h, channels, ++s, -1.0, 1.0), random_grid(h, 2 * h, 1, ++s),
                          random_grid(h, 2 * h, 1, ++s)});
  return pyr;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("cvl_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace cvl::test
