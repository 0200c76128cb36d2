// SPDX-License-Identifier: Apache-2.0
#include "salatt/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace salatt {

AnswerVocab::AnswerVocab(std::vector<std::string> answers) : answers_(std::move(answers)) {
  for (std::size_t i = 0; i < answers_.size(); ++i) {
    if (!index_.emplace(answers_[i], i).second) {
      throw ArgumentError("duplicate answer '" + answers_[i] + "' in vocabulary");
    }
  }
}

std::optional<std::size_t> AnswerVocab::find(std::string_view answer) const {
  auto it = index_.find(std::string(answer));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

AnswerVocab build_answer_vocab(std::span<const std::string> answers, std::size_t k) {
  if (k < 1) throw ArgumentError("build_answer_vocab: k must be >= 1");
  if (answers.empty()) throw ArgumentError("build_answer_vocab: empty answer corpus");
  struct Count {
    std::string answer;
    std::size_t count;
    std::size_t first;
  };
  std::vector<Count> counts;
  std::unordered_map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    auto [it, fresh] = slot.emplace(answers[i], counts.size());
    if (fresh) counts.push_back({answers[i], 0, i});
    ++counts[it->second].count;
  }
  std::stable_sort(counts.begin(), counts.end(), [](const Count& a, const Count& b) {
    return a.count != b.count ? a.count > b.count : a.first < b.first;
  });
  if (counts.size() > k) counts.resize(k);
  std::vector<std::string> top;
  top.reserve(counts.size());
  for (auto& c : counts) top.push_back(std::move(c.answer));
  return AnswerVocab(std::move(top));
}

AnswerVocab build_answer_vocab(const Dataset& train, std::size_t k) {
  std::vector<std::string> answers;
  answers.reserve(train.size());
  for (const auto& s : train) answers.push_back(s.answer);
  return build_answer_vocab(answers, k);
}

void assign_labels(Dataset& data, const AnswerVocab& vocab) {
  for (auto& s : data) s.answer_label = vocab.find(s.answer);
}

std::string canonicalize_answer(std::string_view answer) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!answer.empty() && is_space(answer.front())) answer.remove_prefix(1);
  while (!answer.empty() && is_space(answer.back())) answer.remove_suffix(1);
  std::string out(answer);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

double vqa_accuracy(std::string_view predicted, std::span<const std::string> references) {
  if (references.size() != kReferenceCount) {
    throw ArgumentError("vqa_accuracy: expected " + std::to_string(kReferenceCount) +
                        " reference answers, got " + std::to_string(references.size()));
  }
  const std::string target = canonicalize_answer(predicted);
  std::size_t matches = 0;
  for (const auto& ref : references) matches += canonicalize_answer(ref) == target ? 1 : 0;
  return std::min(static_cast<double>(matches) / 3.0, 1.0);
}

std::vector<const VqaSample*> sample_batch(const Dataset& data, std::size_t batch_size, Rng& rng) {
  if (data.empty()) throw ArgumentError("sample_batch: empty dataset");
  std::vector<const VqaSample*> batch;
  batch.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) batch.push_back(&data[rng.below(data.size())]);
  return batch;
}

// ---------------------------------------------------------------------------
// Text dataset files

namespace {
std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::size_t parse_index(std::string_view text, std::size_t line_no, std::uint64_t offset,
                        const char* what) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw FormatError("line " + std::to_string(line_no) + ": invalid " + what + " '" +
                          std::string(text) + "'",
                      offset);
  }
  return value;
}

void check_field(const std::string& s) {
  if (s.find_first_of("\t\n\r") != std::string::npos) {
    throw ArgumentError("dataset string contains a tab or newline: '" + s + "'");
  }
}
}  // namespace

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ostringstream out;
  for (const auto& s : data) {
    if (s.references.size() != kReferenceCount) {
      throw ArgumentError("write_dataset: sample needs exactly 10 reference answers");
    }
    out << s.image << '\t';
    for (std::size_t i = 0; i < s.question.size(); ++i) out << (i ? " " : "") << s.question[i];
    check_field(s.answer);
    out << '\t' << s.answer;
    for (const auto& r : s.references) {
      check_field(r);
      out << '\t' << r;
    }
    out << '\n';
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error("cannot write dataset file " + path.string());
  const std::string bytes = out.str();
  file.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!file) throw std::runtime_error("write failed for " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path,
                     const std::vector<std::shared_ptr<const RegionFeatureBlock>>& images) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset file " + path.string());
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  std::uint64_t next_offset = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::uint64_t offset = next_offset;
    next_offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 3 + kReferenceCount) {
      throw FormatError("line " + std::to_string(line_no) + ": expected 13 tab-separated fields, found " +
                            std::to_string(fields.size()),
                        offset);
    }
    VqaSample s;
    s.image = parse_index(fields[0], line_no, offset, "image index");
    if (s.image >= images.size()) {
      throw FormatError("line " + std::to_string(line_no) + ": image index " + std::to_string(s.image) +
                            " exceeds feature count " + std::to_string(images.size()),
                        offset);
    }
    s.features = images[s.image];
    std::string_view tokens = fields[1];
    while (!tokens.empty()) {
      const auto space = tokens.find(' ');
      const auto tok = tokens.substr(0, space);
      if (!tok.empty()) s.question.push_back(parse_index(tok, line_no, offset, "token id"));
      if (space == std::string_view::npos) break;
      tokens.remove_prefix(space + 1);
    }
    if (s.question.empty()) throw FormatError("line " + std::to_string(line_no) + ": empty question", offset);
    s.answer = std::string(fields[2]);
    for (std::size_t r = 0; r < kReferenceCount; ++r) s.references.emplace_back(fields[3 + r]);
    data.push_back(std::move(s));
  }
  return data;
}

std::vector<std::shared_ptr<const RegionFeatureBlock>> share_blocks(std::vector<RegionFeatureBlock> blocks) {
  std::vector<std::shared_ptr<const RegionFeatureBlock>> out;
  out.reserve(blocks.size());
  for (auto& b : blocks) out.push_back(std::make_shared<const RegionFeatureBlock>(std::move(b)));
  return out;
}

void map_unknown_tokens(Dataset& data, std::size_t vocab_size) {
  for (auto& s : data) {
    for (auto& id : s.question) {
      if (id >= vocab_size) id = kUnknownToken;
    }
  }
}

}  // namespace salatt
