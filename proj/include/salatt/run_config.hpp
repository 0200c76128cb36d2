// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "salatt/model.hpp"
#include "salatt/trainer.hpp"

namespace salatt {

/// Flat run configuration shared by the command-line tools.
///
/// Two profiles seed the defaults. "desk" (the default) is sized for the toy
/// task on one core; "paper" restores the full-scale hyperparameters
/// (embedding 200, 2×512 question LSTM, 1024-d common space, lr 3e-4,
/// batch 500, evaluate every 1000, patience 5000).
struct RunConfig {
  std::string profile = "desk";
  Variant variant = Variant::SalAtt;
  std::size_t embed_dim = 16;
  std::size_t question_layers = 1;
  std::size_t question_hidden = 16;
  std::size_t common_dim = 32;
  double dropout = 0.1;
  double init_range = 0.08;
  std::size_t top_answers = 1000;
  std::size_t image_side = 448;
  bool l2_normalize = false;  // scale every region vector to unit length on load
  TrainOptions train;
  std::filesystem::path data_dir;
  std::filesystem::path checkpoint;
  std::filesystem::path metrics;

  static RunConfig for_profile(const std::string& profile);
  static const std::vector<std::string>& keys();

  /// Sets one key from its text form. Throws ConfigError on an unknown key
  /// or a malformed value.
  void set(const std::string& key, const std::string& value);

  /// Model dimensions for data with `feature_dim` features per region,
  /// question vocabulary `vocab_size` and `answer_count` classes.
  ModelConfig model(std::size_t feature_dim, std::size_t vocab_size, std::size_t answer_count,
                    const RegionGrid& grid) const;
};

using ConfigPairs = std::vector<std::pair<std::string, std::string>>;

/// Parses "key = value" lines; '#' starts a comment, blank lines are skipped.
ConfigPairs parse_config_text(const std::string& text);
ConfigPairs read_config_file(const std::filesystem::path& path);

/// defaults < file < overrides. The profile is resolved first (an override
/// wins over the file), then every file pair, then every override pair.
RunConfig resolve_config(const ConfigPairs& file, const ConfigPairs& overrides);

/// Throws ConfigError if any path in `paths` does not exist.
void require_existing(const std::vector<std::pair<std::string, std::filesystem::path>>& paths);

}  // namespace salatt
