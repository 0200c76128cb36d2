// SPDX-License-Identifier: Apache-2.0
#include "salatt/regions.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace salatt {

std::size_t region_count(std::size_t g, std::size_t m, std::size_t s) {
  if (m < 1 || s < 1 || g < 1) {
    throw ArgumentError("region_count: g, m, s must be >= 1");
  }
  if (m > g) {
    throw ArgumentError("region_count: region size m=" + std::to_string(m) +
                        " exceeds grid count g=" + std::to_string(g));
  }
  return (g - m) / s + 1;
}

RegionGrid::RegionGrid(std::size_t g, std::size_t m, std::size_t s)
    : g_(g), m_(m), s_(s), n_(region_count(g, m, s)) {}

PixelRect region_bounds(const RegionGrid& grid, std::size_t index, std::size_t image_side) {
  if (index >= grid.region_total()) {
    throw ArgumentError("region_bounds: index " + std::to_string(index) + " out of range for " +
                        std::to_string(grid.region_total()) + " regions");
  }
  if (image_side == 0 || image_side % grid.g() != 0) {
    throw ArgumentError("region_bounds: image side " + std::to_string(image_side) +
                        " is not divisible by g=" + std::to_string(grid.g()));
  }
  const std::size_t cell = image_side / grid.g();
  const std::size_t row = index / grid.n(), col = index % grid.n();
  const std::size_t x0 = col * grid.s() * cell, y0 = row * grid.s() * cell;
  const std::size_t extent = grid.m() * cell;
  return {x0, y0, x0 + extent, y0 + extent};
}

std::size_t region_index_of(const RegionGrid& grid, const PixelRect& rect, std::size_t image_side) {
  if (image_side == 0 || image_side % grid.g() != 0) {
    throw ArgumentError("region_index_of: image side not divisible by g");
  }
  const std::size_t step = grid.s() * (image_side / grid.g());
  if (rect.x0 % step != 0 || rect.y0 % step != 0) {
    throw ArgumentError("region_index_of: rectangle is not aligned to the region stride");
  }
  const std::size_t col = rect.x0 / step, row = rect.y0 / step;
  if (row >= grid.n() || col >= grid.n()) {
    throw ArgumentError("region_index_of: rectangle lies outside the region layout");
  }
  const std::size_t index = row * grid.n() + col;
  if (region_bounds(grid, index, image_side) != rect) {
    throw ArgumentError("region_index_of: rectangle does not match region extent");
  }
  return index;
}

void check_block(const RegionFeatureBlock& block) {
  if (block.features.rank() != 2 || block.features.rows() != block.grid.region_total()) {
    throw DimensionError("region block has shape " + shape_to_string(block.features.shape()) +
                         ", expected " + std::to_string(block.grid.region_total()) + " rows");
  }
  if (!block.features.all_finite()) throw ArgumentError("region block contains non-finite values");
}

void l2_normalize_rows(RegionFeatureBlock& block) {
  for (std::size_t r = 0; r < block.features.rows(); ++r) {
    auto row = block.features.row(r);
    double norm = 0.0;
    for (double v : row) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    for (double& v : row) v /= norm;
  }
}

// ---------------------------------------------------------------------------
// Feature files

namespace {
constexpr std::size_t kHeaderBytes = 8 + 5 * 4;

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

std::uint32_t narrow_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffULL) throw ArgumentError(std::string(what) + " does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open feature file " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

FeatureFileHeader parse_header(const std::string& bytes) {
  if (bytes.size() < 8) throw FormatError("feature file shorter than its magic tag", bytes.size());
  if (std::memcmp(bytes.data(), kFeatureMagic, 8) != 0) throw FormatError("bad feature file magic", 0);
  if (bytes.size() < kHeaderBytes) throw FormatError("truncated feature file header", bytes.size());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + 8;
  FeatureFileHeader h{get_u32(p), get_u32(p + 4), get_u32(p + 8), get_u32(p + 12), get_u32(p + 16)};
  if (h.g < 1 || h.m < 1 || h.s < 1 || h.m > h.g) {
    throw FormatError("invalid region grid (g=" + std::to_string(h.g) + ", m=" + std::to_string(h.m) +
                          ", s=" + std::to_string(h.s) + ")",
                      8);
  }
  if (h.d_I < 1) throw FormatError("feature dimension must be positive", 20);
  return h;
}
}  // namespace

void write_features(const std::filesystem::path& path, const std::vector<RegionFeatureBlock>& blocks,
                    const RegionGrid& grid, std::size_t d_I) {
  std::string out(kFeatureMagic, 8);
  put_u32(out, narrow_u32(grid.g(), "g"));
  put_u32(out, narrow_u32(grid.m(), "m"));
  put_u32(out, narrow_u32(grid.s(), "s"));
  put_u32(out, narrow_u32(d_I, "d_I"));
  put_u32(out, narrow_u32(blocks.size(), "image count"));
  for (const auto& b : blocks) {
    if (!(b.grid == grid) || b.feature_dim() != d_I) {
      throw ArgumentError("write_features: blocks disagree on grid or feature dimension");
    }
    check_block(b);
    for (double v : b.features.data()) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error("cannot write feature file " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw std::runtime_error("write failed for " + path.string());
}

void write_features(const std::filesystem::path& path, const std::vector<RegionFeatureBlock>& blocks) {
  if (blocks.empty()) throw ArgumentError("write_features: need grid and d_I for an empty list");
  write_features(path, blocks, blocks.front().grid, blocks.front().feature_dim());
}

FeatureFileHeader read_feature_header(const std::filesystem::path& path) {
  const std::string bytes = read_all(path);
  return parse_header(bytes);
}

std::vector<RegionFeatureBlock> load_features(const std::filesystem::path& path) {
  const std::string bytes = read_all(path);
  const FeatureFileHeader h = parse_header(bytes);
  const RegionGrid grid(h.g, h.m, h.s);
  const std::uint64_t per_image = std::uint64_t{grid.region_total()} * h.d_I;
  const std::uint64_t expected = kHeaderBytes + per_image * h.count * 4;
  if (bytes.size() < expected) {
    throw FormatError("truncated feature payload: expected " + std::to_string(expected) +
                          " bytes, found " + std::to_string(bytes.size()),
                      bytes.size());
  }
  if (bytes.size() > expected) {
    throw FormatError("trailing bytes after feature payload of " + std::to_string(expected) + " bytes",
                      expected);
  }
  std::vector<RegionFeatureBlock> blocks;
  blocks.reserve(h.count);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  std::uint64_t offset = kHeaderBytes;
  for (std::uint32_t img = 0; img < h.count; ++img) {
    Tensor features({grid.region_total(), std::size_t{h.d_I}});
    for (auto& v : features.data()) {
      const float f = std::bit_cast<float>(get_u32(p + offset));
      if (!std::isfinite(f)) throw FormatError("non-finite feature value", offset);
      v = static_cast<double>(f);
      offset += 4;
    }
    blocks.push_back({grid, std::move(features)});
  }
  return blocks;
}

// ---------------------------------------------------------------------------
// Synthetic features

PatternBank make_pattern_bank(std::size_t patterns, std::size_t d_I, Rng& rng) {
  if (patterns < 1) throw ArgumentError("pattern count must be >= 1");
  if (d_I < 1) throw ArgumentError("feature dimension must be >= 1");
  Tensor protos({patterns, d_I});
  const double target = std::sqrt(static_cast<double>(d_I));
  for (std::size_t p = 0; p < patterns; ++p) {
    auto row = protos.row(p);
    for (double& v : row) v = rng.normal();
    // Gram-Schmidt against earlier prototypes while directions remain.
    if (p < d_I) {
      for (std::size_t q = 0; q < p; ++q) {
        auto prev = protos.row(q);
        double proj = 0.0, prev_norm = 0.0;
        for (std::size_t j = 0; j < d_I; ++j) {
          proj += row[j] * prev[j];
          prev_norm += prev[j] * prev[j];
        }
        for (std::size_t j = 0; j < d_I; ++j) row[j] -= proj / prev_norm * prev[j];
      }
    }
    double norm = 0.0;
    for (double v : row) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : row) v *= target / norm;
  }
  return {std::move(protos)};
}

SynthFeatures synth_features(const SynthFeatureSpec& spec, const PatternBank& bank, Rng& rng) {
  if (spec.patterns < 1) throw ArgumentError("synth_features: pattern count must be >= 1");
  if (bank.count() != spec.patterns || bank.dim() != spec.d_I) {
    throw DimensionError("synth_features: pattern bank is " + shape_to_string(bank.prototypes.shape()) +
                         ", spec asks for " + std::to_string(spec.patterns) + "x" +
                         std::to_string(spec.d_I));
  }
  if (spec.noise < 0.0) throw ArgumentError("synth_features: noise must be non-negative");
  const std::size_t regions = spec.grid.region_total();
  const std::size_t planted = rng.below(regions);
  const std::size_t pattern = rng.below(spec.patterns);
  Tensor features({regions, spec.d_I});
  for (std::size_t r = 0; r < regions; ++r) {
    auto row = features.row(r);
    for (double& v : row) v = spec.noise > 0.0 ? spec.noise * rng.normal() : 0.0;
  }
  auto target = features.row(planted);
  auto proto = bank.prototypes.row(pattern);
  for (std::size_t j = 0; j < spec.d_I; ++j) target[j] += proto[j];
  return {{spec.grid, std::move(features)}, planted, pattern};
}

SynthFeatures synth_features(const SynthFeatureSpec& spec, Rng& rng) {
  if (spec.patterns < 1) throw ArgumentError("synth_features: pattern count must be >= 1");
  const PatternBank bank = make_pattern_bank(spec.patterns, spec.d_I, rng);
  return synth_features(spec, bank, rng);
}

}  // namespace salatt
