// SPDX-License-Identifier: Apache-2.0
#include "salatt/weight_map.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "salatt/tensor.hpp"

namespace salatt {

std::vector<int> to_gray_levels(std::span<const double> weights) {
  std::vector<int> levels(weights.size(), 0);
  if (weights.empty()) return levels;
  const auto [lo, hi] = std::minmax_element(weights.begin(), weights.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return levels;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    levels[i] = static_cast<int>(std::lround(255.0 * (weights[i] - *lo) / range));
  }
  return levels;
}

std::string pgm_text(std::span<const double> weights, std::size_t n) {
  if (weights.size() != n * n) {
    throw DimensionError("pgm: " + std::to_string(weights.size()) + " weights do not fill a " + std::to_string(n) +
                         "x" + std::to_string(n) + " map");
  }
  const auto levels = to_gray_levels(weights);
  std::string out = "P2\n" + std::to_string(n) + " " + std::to_string(n) + "\n255\n";
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      if (c) out += ' ';
      out += std::to_string(levels[r * n + c]);
    }
    out += '\n';
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, std::span<const double> weights, std::size_t n) {
  const std::string text = pgm_text(weights, n);
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error("cannot write " + path.string());
  file << text;
  if (!file) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace salatt
