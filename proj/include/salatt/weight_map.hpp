// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace salatt {

/// Min-max scales `weights` to 0..255 (rounded). Constant input maps to all
/// zeros.
std::vector<int> to_gray_levels(std::span<const double> weights);

/// ASCII (P2) graymap of an n×n map in row-major region order.
std::string pgm_text(std::span<const double> weights, std::size_t n);
void write_pgm(const std::filesystem::path& path, std::span<const double> weights, std::size_t n);

}  // namespace salatt
