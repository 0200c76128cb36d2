// SPDX-License-Identifier: Apache-2.0
#include "salatt/toy_task.hpp"

#include <array>

namespace salatt {

namespace {
constexpr std::array<const char*, 8> kPatternNames = {"circle", "square", "triangle", "star",
                                                      "cross",  "ring",   "wave",     "spiral"};
constexpr std::array<const char*, 2> kColors = {"red", "blue"};
constexpr std::array<const char*, 2> kSizes = {"small", "large"};

// Template k asks "what <attribute k> is the pattern"; the attribute word is
// the only token that differs between templates.
constexpr std::array<const char*, 3> kTemplateWords = {"what", "is", "the"};
constexpr std::array<const char*, 3> kAttributeWords = {"shape", "color", "size"};
constexpr const char* kTrailingWord = "pattern";

std::string attribute_word(std::size_t template_id) {
  if (template_id < kAttributeWords.size()) return kAttributeWords[template_id];
  return "kind" + std::to_string(template_id);
}
}  // namespace

void ToyTaskSpec::validate() const {
  if (patterns < 1) throw ArgumentError("toy task: need at least one pattern");
  if (templates < 1) throw ArgumentError("toy task: need at least one question template");
  if (train_size < 1) throw ArgumentError("toy task: training split must be non-empty");
  if (feature_dim < 1) throw ArgumentError("toy task: feature dimension must be positive");
  if (noise < 0.0) throw ArgumentError("toy task: noise must be non-negative");
}

std::string pattern_name(std::size_t pattern) {
  if (pattern < kPatternNames.size()) return kPatternNames[pattern];
  return "pattern" + std::to_string(pattern);
}

std::vector<std::string> toy_question_vocab(std::size_t templates) {
  std::vector<std::string> vocab = {"<unk>"};
  for (const char* w : kTemplateWords) vocab.emplace_back(w);
  vocab.emplace_back(kTrailingWord);
  for (std::size_t k = 0; k < templates; ++k) vocab.push_back(attribute_word(k));
  return vocab;
}

std::vector<std::size_t> toy_question(std::size_t template_id) {
  // "what" "<attribute>" "is" "the" "pattern"
  const std::size_t attribute = 1 + kTemplateWords.size() + 1 + template_id;
  return {1, attribute, 2, 3, 1 + kTemplateWords.size()};
}

std::string toy_answer(std::size_t pattern, std::size_t template_id, std::size_t patterns) {
  if (pattern >= patterns) throw ArgumentError("toy_answer: pattern index out of range");
  switch (template_id) {
    case 0: return pattern_name(pattern);
    case 1: return kColors[pattern % 2];
    case 2: return kSizes[(pattern / 2) % 2];
    default:
      // Further templates partition the patterns into template_id classes.
      return attribute_word(template_id) + "-" + std::to_string(pattern % template_id);
  }
}

ToyTask build_toy_task(const ToyTaskSpec& spec, Rng& rng) {
  spec.validate();
  Rng bank_rng = rng.split(0);
  Rng sample_rng = rng.split(1);

  ToyTask task;
  task.bank = make_pattern_bank(spec.patterns, spec.feature_dim, bank_rng);
  task.question_vocab = toy_question_vocab(spec.templates);
  const SynthFeatureSpec feature_spec{spec.grid, spec.feature_dim, spec.patterns, spec.noise};

  auto make_split = [&](std::size_t count, Dataset& out, bool record_regions) {
    for (std::size_t i = 0; i < count; ++i) {
      auto synth = synth_features(feature_spec, task.bank, sample_rng);
      const std::size_t template_id = sample_rng.below(spec.templates);
      VqaSample s;
      s.image = task.images.size();
      s.features = std::make_shared<const RegionFeatureBlock>(std::move(synth.block));
      task.images.push_back(s.features);
      s.question = toy_question(template_id);
      s.answer = toy_answer(synth.pattern, template_id, spec.patterns);
      s.references.assign(kReferenceCount, s.answer);
      if (record_regions) task.train_planted_regions.push_back(synth.planted_region);
      out.push_back(std::move(s));
    }
  };
  make_split(spec.train_size, task.train, true);
  make_split(spec.val_size, task.val, false);

  const AnswerVocab vocab = build_answer_vocab(task.train, 1000);
  assign_labels(task.train, vocab);
  assign_labels(task.val, vocab);
  return task;
}

double majority_baseline(const Dataset& train, const Dataset& val) {
  if (val.empty()) return 0.0;
  const AnswerVocab vocab = build_answer_vocab(train, 1);
  double total = 0.0;
  for (const auto& s : val) total += vqa_accuracy(vocab.answer(0), s.references);
  return total / static_cast<double>(val.size());
}

}  // namespace salatt
