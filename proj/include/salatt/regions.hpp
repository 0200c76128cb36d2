// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "salatt/rng.hpp"
#include "salatt/tensor.hpp"

namespace salatt {

/// Thrown when a binary file does not follow its declared layout.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& message, std::uint64_t offset)
      : std::runtime_error(message + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Number of m×m-grid windows per side with stride s over g grids.
std::size_t region_count(std::size_t g, std::size_t m, std::size_t s);

/// A g×g grid scanned by m×m windows with stride s, giving n×n regions.
/// Regions are indexed row-major: index = row·n + col.
class RegionGrid {
 public:
  RegionGrid(std::size_t g, std::size_t m, std::size_t s);

  std::size_t g() const { return g_; }
  std::size_t m() const { return m_; }
  std::size_t s() const { return s_; }
  std::size_t n() const { return n_; }
  std::size_t region_total() const { return n_ * n_; }

  friend bool operator==(const RegionGrid&, const RegionGrid&) = default;

 private:
  std::size_t g_, m_, s_, n_;
};

struct PixelRect {
  std::size_t x0, y0, x1, y1;  // half-open: [x0, x1) × [y0, y1)
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Pixel rectangle of region `index` in a square image of `image_side` pixels.
PixelRect region_bounds(const RegionGrid& grid, std::size_t index, std::size_t image_side);
/// Inverse of region_bounds; throws ArgumentError if `rect` is not a region.
std::size_t region_index_of(const RegionGrid& grid, const PixelRect& rect, std::size_t image_side);

/// Region features of one image: n² rows of d_I values in region order.
struct RegionFeatureBlock {
  RegionGrid grid;
  Tensor features;

  std::size_t feature_dim() const { return features.cols(); }
  std::size_t region_total() const { return features.rows(); }
};

/// Validates row count and finiteness.
void check_block(const RegionFeatureBlock& block);

/// Scales each row to unit L2 norm; zero rows stay zero.
void l2_normalize_rows(RegionFeatureBlock& block);

// Feature file: "SALATTF1", then u32 LE g, m, s, d_I, count, then
// count·n²·d_I f32 LE values (image-major, region-row-major, feature-minor).
inline constexpr char kFeatureMagic[8] = {'S', 'A', 'L', 'A', 'T', 'T', 'F', '1'};

struct FeatureFileHeader {
  std::uint32_t g = 0, m = 0, s = 0, d_I = 0, count = 0;
};

/// All blocks must share one grid and feature dimension. The grid is taken
/// from `blocks` unless the list is empty, in which case `grid`/`d_I` apply.
void write_features(const std::filesystem::path& path, const std::vector<RegionFeatureBlock>& blocks,
                    const RegionGrid& grid, std::size_t d_I);
void write_features(const std::filesystem::path& path, const std::vector<RegionFeatureBlock>& blocks);
FeatureFileHeader read_feature_header(const std::filesystem::path& path);
std::vector<RegionFeatureBlock> load_features(const std::filesystem::path& path);

/// Prototype vectors for the synthetic task: orthogonalised Gaussian
/// directions scaled so entries have unit mean square.
struct PatternBank {
  Tensor prototypes;  // [P×d_I]
  std::size_t count() const { return prototypes.rows(); }
  std::size_t dim() const { return prototypes.cols(); }
};

struct SynthFeatureSpec {
  RegionGrid grid{4, 2, 1};
  std::size_t d_I = 16;
  std::size_t patterns = 4;
  double noise = 0.1;
};

PatternBank make_pattern_bank(std::size_t patterns, std::size_t d_I, Rng& rng);

struct SynthFeatures {
  RegionFeatureBlock block;
  std::size_t planted_region;
  std::size_t pattern;
};

/// One block where a uniformly chosen region holds a uniformly chosen
/// prototype plus N(0, noise²) per entry, and every other region holds
/// noise only.
SynthFeatures synth_features(const SynthFeatureSpec& spec, const PatternBank& bank, Rng& rng);
/// Draws the bank from `rng` first, then the block.
SynthFeatures synth_features(const SynthFeatureSpec& spec, Rng& rng);

}  // namespace salatt
