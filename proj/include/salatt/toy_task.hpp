// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "salatt/dataset.hpp"
#include "salatt/regions.hpp"

namespace salatt {

/// Synthetic question answering over planted patterns.
///
/// Each image hides one of `patterns` prototypes in a random region. The
/// question picks an attribute of that pattern: template 0 asks for its
/// shape name, template 1 its colour (p mod 2), template 2 its size
/// ((p / 2) mod 2), later templates p mod k. The answer type is set by the
/// question and the value by the localised visual evidence.
struct ToyTaskSpec {
  std::size_t patterns = 4;
  std::size_t templates = 2;
  std::size_t train_size = 2000;
  std::size_t val_size = 200;
  std::size_t feature_dim = 16;
  double noise = 0.5;
  RegionGrid grid{4, 2, 1};

  void validate() const;
};

struct ToyTask {
  Dataset train;
  Dataset val;
  /// Every image, train first then val; sample.image indexes this list.
  std::vector<std::shared_ptr<const RegionFeatureBlock>> images;
  /// Question words by token id; id 0 is the unknown-word token.
  std::vector<std::string> question_vocab;
  PatternBank bank;
  std::vector<std::size_t> train_planted_regions;
};

std::string pattern_name(std::size_t pattern);
std::vector<std::size_t> toy_question(std::size_t template_id);
std::string toy_answer(std::size_t pattern, std::size_t template_id, std::size_t patterns);
std::vector<std::string> toy_question_vocab(std::size_t templates);

ToyTask build_toy_task(const ToyTaskSpec& spec, Rng& rng);

/// Accuracy of always predicting the most frequent training answer on `val`
/// (ties by first occurrence).
double majority_baseline(const Dataset& train, const Dataset& val);

}  // namespace salatt
