// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "salatt/dataset.hpp"
#include "salatt/toy_task.hpp"

namespace salatt {

// Files of a data directory as written by gen-toy.
inline constexpr const char* kFeaturesFile = "features.bin";
inline constexpr const char* kTrainFile = "train.tsv";
inline constexpr const char* kValFile = "val.tsv";
inline constexpr const char* kVocabFile = "vocab.txt";

void write_toy_data(const std::filesystem::path& dir, const ToyTask& task, const ToyTaskSpec& spec);

struct DataDir {
  std::vector<std::shared_ptr<const RegionFeatureBlock>> images;
  Dataset train;
  Dataset val;
  std::vector<std::string> question_vocab;
  RegionGrid grid{4, 2, 1};
  std::size_t feature_dim = 0;
};

/// Loads a data directory; tokens outside the question vocabulary become
/// the unknown-word token. `l2_normalize` rescales each region vector to
/// unit length.
DataDir load_data_dir(const std::filesystem::path& dir, bool l2_normalize = false);

/// Entry point of the salatt tool. Returns the process exit code; every
/// error is reported as one line on `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace salatt
