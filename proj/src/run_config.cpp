// SPDX-License-Identifier: Apache-2.0
#include "salatt/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

namespace salatt {

namespace {
std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("config key '" + key + "' expects a non-negative integer, got '" + value + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  in.imbue(std::locale::classic());
  double out = 0.0;
  in >> out;
  if (value.empty() || in.fail() || !in.eof()) {
    throw ConfigError("config key '" + key + "' expects a number, got '" + value + "'");
  }
  return out;
}
}  // namespace

RunConfig RunConfig::for_profile(const std::string& profile) {
  RunConfig c;
  if (profile == "desk") {
    c.train = TrainOptions::desk_profile();
  } else if (profile == "paper") {
    c.profile = profile;
    c.embed_dim = 200;
    c.question_layers = 2;
    c.question_hidden = 512;
    c.common_dim = 1024;
    c.dropout = 0.5;
    c.train = TrainOptions::paper_profile();
  } else {
    throw ConfigError("unknown profile '" + profile + "' (expected desk or paper)");
  }
  return c;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = {
      "profile",        "variant",     "embed_dim",   "question_layers", "question_hidden", "common_dim",
      "dropout",        "init_range",  "top_answers", "image_side",      "learning_rate",   "rms_decay",
      "rms_epsilon",    "batch_size",  "eval_every",  "patience",        "max_iterations",  "seed",
      "l2_normalize",   "data_dir",    "checkpoint",  "metrics"};
  return k;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "profile") {
    if (value != "desk" && value != "paper") {
      throw ConfigError("unknown profile '" + value + "' (expected desk or paper)");
    }
    profile = value;
  } else if (key == "variant") {
    variant = parse_variant(value);
  } else if (key == "embed_dim") {
    embed_dim = parse_size(key, value);
  } else if (key == "question_layers") {
    question_layers = parse_size(key, value);
  } else if (key == "question_hidden") {
    question_hidden = parse_size(key, value);
  } else if (key == "common_dim") {
    common_dim = parse_size(key, value);
  } else if (key == "dropout") {
    dropout = parse_real(key, value);
  } else if (key == "init_range") {
    init_range = parse_real(key, value);
  } else if (key == "top_answers") {
    top_answers = parse_size(key, value);
  } else if (key == "image_side") {
    image_side = parse_size(key, value);
  } else if (key == "l2_normalize") {
    if (value == "true" || value == "1") {
      l2_normalize = true;
    } else if (value == "false" || value == "0") {
      l2_normalize = false;
    } else {
      throw ConfigError("config key 'l2_normalize' expects true or false, got '" + value + "'");
    }
  } else if (key == "learning_rate") {
    train.optimizer.learning_rate = parse_real(key, value);
  } else if (key == "rms_decay") {
    train.optimizer.decay = parse_real(key, value);
  } else if (key == "rms_epsilon") {
    train.optimizer.epsilon = parse_real(key, value);
  } else if (key == "batch_size") {
    train.batch_size = parse_size(key, value);
  } else if (key == "eval_every") {
    train.eval_every = parse_size(key, value);
  } else if (key == "patience") {
    train.patience = parse_size(key, value);
  } else if (key == "max_iterations") {
    train.max_iterations = parse_size(key, value);
  } else if (key == "seed") {
    train.seed = parse_size(key, value);
  } else if (key == "data_dir") {
    data_dir = value;
  } else if (key == "checkpoint") {
    checkpoint = value;
  } else if (key == "metrics") {
    metrics = value;
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

ModelConfig RunConfig::model(std::size_t feature_dim, std::size_t vocab_size, std::size_t answer_count,
                             const RegionGrid& grid) const {
  ModelConfig m;
  m.variant = variant;
  m.feature_dim = feature_dim;
  m.embed_dim = embed_dim;
  m.question_layers = question_layers;
  m.question_hidden = question_hidden;
  m.common_dim = common_dim;
  m.vocab_size = vocab_size;
  m.answer_count = answer_count;
  m.dropout_rate = dropout;
  m.grid = grid;
  m.validate();
  return m;
}

ConfigPairs parse_config_text(const std::string& text) {
  ConfigPairs pairs;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    const auto& known = RunConfig::keys();
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    pairs.emplace_back(std::move(key), std::move(value));
  }
  return pairs;
}

ConfigPairs read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config_text(std::string(std::istreambuf_iterator<char>(in), {}));
}

RunConfig resolve_config(const ConfigPairs& file, const ConfigPairs& overrides) {
  std::string profile = "desk";
  for (const auto* pairs : {&file, &overrides}) {
    for (const auto& [k, v] : *pairs) {
      if (k == "profile") profile = v;
    }
  }
  RunConfig config = RunConfig::for_profile(profile);
  for (const auto& [k, v] : file) config.set(k, v);
  for (const auto& [k, v] : overrides) config.set(k, v);
  config.profile = profile;
  return config;
}

void require_existing(const std::vector<std::pair<std::string, std::filesystem::path>>& paths) {
  for (const auto& [what, path] : paths) {
    if (path.empty()) throw ConfigError(what + " is not set");
    if (!std::filesystem::exists(path)) throw ConfigError(what + " does not exist: " + path.string());
  }
}

}  // namespace salatt
