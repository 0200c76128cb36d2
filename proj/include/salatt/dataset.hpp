// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "salatt/regions.hpp"
#include "salatt/rng.hpp"

namespace salatt {

inline constexpr std::size_t kReferenceCount = 10;
/// Question token reserved for words outside the vocabulary.
inline constexpr std::size_t kUnknownToken = 0;

/// One image-question-answer triple.
struct VqaSample {
  std::size_t image = 0;  // index into the feature file
  std::shared_ptr<const RegionFeatureBlock> features;
  std::vector<std::size_t> question;
  std::string answer;
  std::optional<std::size_t> answer_label;  // absent when outside the answer vocabulary
  std::vector<std::string> references;      // exactly kReferenceCount
};

using Dataset = std::vector<VqaSample>;

/// Answers ordered by descending frequency, ties by first occurrence.
class AnswerVocab {
 public:
  AnswerVocab() = default;
  explicit AnswerVocab(std::vector<std::string> answers);

  std::size_t size() const { return answers_.size(); }
  const std::string& answer(std::size_t index) const { return answers_.at(index); }
  const std::vector<std::string>& answers() const { return answers_; }
  std::optional<std::size_t> find(std::string_view answer) const;

 private:
  std::vector<std::string> answers_;
  std::unordered_map<std::string, std::size_t> index_;
};

AnswerVocab build_answer_vocab(std::span<const std::string> answers, std::size_t k);
AnswerVocab build_answer_vocab(const Dataset& train, std::size_t k);

/// Sets answer_label from `vocab` for every sample (absent for misses).
void assign_labels(Dataset& data, const AnswerVocab& vocab);

/// Lowercase and trim surrounding whitespace.
std::string canonicalize_answer(std::string_view answer);

/// min(#matching references / 3, 1) after canonicalisation.
double vqa_accuracy(std::string_view predicted, std::span<const std::string> references);

/// Uniform draws with replacement.
std::vector<const VqaSample*> sample_batch(const Dataset& data, std::size_t batch_size, Rng& rng);

// Dataset file: UTF-8, one sample per line, tab-separated fields
//   image-index <TAB> space-separated token ids <TAB> answer <TAB> ref₁ ... <TAB> ref₁₀
// Strings may not contain tabs or newlines.
void write_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path,
                     const std::vector<std::shared_ptr<const RegionFeatureBlock>>& images);

std::vector<std::shared_ptr<const RegionFeatureBlock>> share_blocks(std::vector<RegionFeatureBlock> blocks);

/// Replaces token ids ≥ vocab_size with kUnknownToken.
void map_unknown_tokens(Dataset& data, std::size_t vocab_size);

}  // namespace salatt
