// SPDX-License-Identifier: Apache-2.0
#include "salatt/model.hpp"

#include <array>

namespace salatt {

namespace {
constexpr std::array<Variant, 5> kVariants = {Variant::SalAtt, Variant::Holistic, Variant::TraAtt,
                                              Variant::RegAtt, Variant::ConAtt};

std::string question_prefix(std::size_t layer) { return "question.l" + std::to_string(layer); }

Tensor uniform_tensor(const Shape& shape, Rng& rng, double range) {
  Tensor t(shape);
  for (auto& v : t.data()) v = rng.uniform(-range, range);
  return t;
}

bool is_bias(const std::string& name) {
  const auto dot = name.rfind('.');
  const std::string leaf = name.substr(dot + 1);
  return leaf == "b" || leaf.starts_with("b_");
}

void append_lstm(std::vector<std::pair<std::string, Shape>>& out, const std::string& prefix,
                 std::size_t input, std::size_t hidden) {
  const auto names = lstm_param_names(prefix);
  for (std::size_t k = 0; k < 4; ++k) out.emplace_back(names[k], Shape{hidden, input});
  for (std::size_t k = 4; k < 8; ++k) out.emplace_back(names[k], Shape{hidden, hidden});
  for (std::size_t k = 8; k < 12; ++k) out.emplace_back(names[k], Shape{hidden});
}

Var region_sequence_scores(const BiLstmParams& p, Var features) {
  const std::size_t n = features.value().rows();
  std::vector<Var> seq;
  seq.reserve(n);
  for (std::size_t r = 0; r < n; ++r) seq.push_back(row(features, r));
  const auto outputs = bilstm_forward(p, seq);
  for (Var o : outputs) {
    if (o.value().size() != 1) {
      throw DimensionError("preselect_weights: BiLSTM hidden size must be 1, got " +
                           shape_to_string(o.shape()));
    }
  }
  return concat(outputs);
}
}  // namespace

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::SalAtt: return "SalAtt";
    case Variant::Holistic: return "Holistic";
    case Variant::TraAtt: return "TraAtt";
    case Variant::RegAtt: return "RegAtt";
    case Variant::ConAtt: return "ConAtt";
  }
  throw ConfigError("unknown variant");
}

Variant parse_variant(std::string_view name) {
  for (Variant v : kVariants) {
    if (variant_name(v) == name) return v;
  }
  throw ConfigError("unknown variant '" + std::string(name) +
                    "' (expected one of SalAtt, Holistic, TraAtt, RegAtt, ConAtt)");
}

std::span<const Variant> all_variants() { return kVariants; }

std::size_t ModelConfig::classifier_input_dim() const {
  return variant == Variant::TraAtt ? 2 * common_dim : common_dim;
}

void ModelConfig::validate() const {
  const std::pair<const char*, std::size_t> dims[] = {
      {"feature_dim", feature_dim},       {"embed_dim", embed_dim},   {"question_layers", question_layers},
      {"question_hidden", question_hidden}, {"common_dim", common_dim}, {"vocab_size", vocab_size},
      {"answer_count", answer_count}};
  for (const auto& [name, value] : dims) {
    if (value == 0) throw ConfigError(std::string("model dimension ") + name + " must be positive");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
}

std::vector<std::pair<std::string, Shape>> expected_param_shapes(const ModelConfig& c) {
  c.validate();
  std::vector<std::pair<std::string, Shape>> out;
  out.emplace_back("embedding", Shape{c.vocab_size, c.embed_dim});
  for (std::size_t k = 0; k < c.question_layers; ++k) {
    append_lstm(out, question_prefix(k), k == 0 ? c.embed_dim : c.question_hidden, c.question_hidden);
  }
  if (c.variant == Variant::SalAtt) {
    append_lstm(out, "preselect.fwd", c.feature_dim, 1);
    append_lstm(out, "preselect.bwd", c.feature_dim, 1);
  }
  if (c.variant == Variant::ConAtt) {
    out.emplace_back("preselect.conv.w", Shape{1, c.feature_dim});
  }
  out.emplace_back("visual_map.W", Shape{c.common_dim, c.feature_dim});
  out.emplace_back("visual_map.b", Shape{c.common_dim});
  out.emplace_back("question_map.W", Shape{c.common_dim, c.question_dim()});
  out.emplace_back("question_map.b", Shape{c.common_dim});
  out.emplace_back("classifier.W", Shape{c.answer_count, c.classifier_input_dim()});
  out.emplace_back("classifier.b", Shape{c.answer_count});
  return out;
}

ParamStore init_params(const ModelConfig& config, Rng& rng, double init_range) {
  ParamStore store;
  for (const auto& [name, shape] : expected_param_shapes(config)) {
    store.add(name, is_bias(name) ? Tensor(shape) : uniform_tensor(shape, rng, init_range));
  }
  return store;
}

void check_params(const ModelConfig& config, const ParamStore& params) {
  const auto expected = expected_param_shapes(config);
  for (const auto& [name, shape] : expected) {
    if (!params.contains(name)) {
      throw ConfigError("parameter '" + name + "' with shape " + shape_to_string(shape) + " is missing");
    }
    const Shape& found = params.at(name).value.shape();
    if (found != shape) {
      throw ConfigError("parameter '" + name + "' expected shape " + shape_to_string(shape) +
                        ", found " + shape_to_string(found));
    }
  }
  if (params.size() != expected.size()) {
    for (const auto& name : params.names()) {
      bool known = false;
      for (const auto& e : expected) known = known || e.first == name;
      if (!known) {
        throw ConfigError("unexpected parameter '" + name + "' for variant " +
                          std::string(variant_name(config.variant)));
      }
    }
  }
}

ModelVars bind_params(Tape& tape, const ModelConfig& config, ParamStore& params) {
  auto p = [&](const std::string& name) { return tape.parameter(params.at(name)); };
  ModelVars vars;
  vars.embedding = p("embedding");
  for (std::size_t k = 0; k < config.question_layers; ++k) {
    vars.question_layers.push_back(bind_lstm_cell(tape, params, question_prefix(k)));
  }
  if (config.variant == Variant::SalAtt) {
    vars.preselect = BiLstmParams{bind_lstm_cell(tape, params, "preselect.fwd"),
                                  bind_lstm_cell(tape, params, "preselect.bwd")};
  }
  if (config.variant == Variant::ConAtt) {
    vars.conv_preselect = p("preselect.conv.w");
  }
  vars.maps = {p("visual_map.W"), p("visual_map.b"), p("question_map.W"), p("question_map.b")};
  vars.classifier_w = p("classifier.W");
  vars.classifier_b = p("classifier.b");
  return vars;
}

Var DropoutContext::apply(Var x) const {
  if (mode == Mode::Eval || rate == 0.0) return x;
  if (rng == nullptr) throw ArgumentError("dropout in train mode needs an Rng");
  return dropout(x, rate, mode, *rng);
}

Var preselect_weights(const BiLstmParams& p, Var features) {
  if (features.value().rank() != 2 || features.value().rows() < 1) {
    throw DimensionError("preselect_weights: expected an [N×d_I] region block");
  }
  return softmax(region_sequence_scores(p, features));
}

Var apply_preselection(Var weights, Var features) { return scale_rows(weights, features); }

Var conv_preselect_weights(Var w, Var features) {
  const Shape& ws = w.shape();
  if (ws.size() != 2 || ws[0] != 1 || features.shape().size() != 2 || ws[1] != features.shape()[1]) {
    throw DimensionError("conv_preselect_weights: scorer " + shape_to_string(ws) + " does not fit regions " +
                         shape_to_string(features.shape()));
  }
  return softmax(matvec(features, reshape(w, {ws[1]})));
}

EwmFusion fuse_ewm_attention(Var question, Var features, const CommonMaps& maps, const DropoutContext& drop) {
  const std::size_t n = features.value().rows();
  Var visual = drop.apply(tanh_op(linear_rows(features, maps.visual_w, maps.visual_b)));
  Var text = drop.apply(tanh_op(affine(maps.question_w, question, maps.question_b)));
  Var per_region = ewmul(visual, broadcast_rows(text, n));
  auto pooled = max_pool_rows(per_region);
  Tensor map({n});
  const double share = 1.0 / static_cast<double>(pooled.argmax.size());
  for (std::size_t winner : pooled.argmax) map[winner] += share;
  return {pooled.value, per_region, std::move(map)};
}

TraditionalFusion fuse_traditional_attention(Var question, Var features, const CommonMaps& maps,
                                             const DropoutContext& drop) {
  Var visual = drop.apply(tanh_op(linear_rows(features, maps.visual_w, maps.visual_b)));
  Var text = drop.apply(tanh_op(affine(maps.question_w, question, maps.question_b)));
  Var alpha = softmax(matvec(visual, text));
  Var attended = matvec(transpose(visual), alpha);
  const Var parts[] = {attended, text};
  return {concat(parts), alpha};
}

Var fuse_holistic(Var question, Var features, const CommonMaps& maps, const DropoutContext& drop) {
  Var holistic = mean_rows(features);
  Var visual = drop.apply(tanh_op(affine(maps.visual_w, holistic, maps.visual_b)));
  Var text = drop.apply(tanh_op(affine(maps.question_w, question, maps.question_b)));
  return ewmul(visual, text);
}

Var classify(Var fused, Var w, Var b) { return affine(w, fused, b); }

Var encode_question(const ModelVars& vars, std::span<const std::size_t> tokens) {
  if (tokens.empty()) throw ArgumentError("encode_question: empty question");
  const std::size_t vocab = vars.embedding.value().rows();
  std::vector<Var> embedded;
  embedded.reserve(tokens.size());
  for (std::size_t id : tokens) {
    if (id >= vocab) {
      throw ArgumentError("token id " + std::to_string(id) + " out of range for vocabulary of " +
                          std::to_string(vocab));
    }
    embedded.push_back(row(vars.embedding, id));
  }
  return question_final_encoding(vars.question_layers, embedded);
}

ForwardTrace forward(Tape& tape, const ModelConfig& config, ParamStore& params, const ModelInput& input,
                     const ForwardOptions& options) {
  const Tensor& feats = input.features;
  if (feats.rank() != 2 || feats.rows() != config.grid.region_total() || feats.cols() != config.feature_dim) {
    throw DimensionError("forward: region features " + shape_to_string(feats.shape()) +
                         " do not match config [" + std::to_string(config.grid.region_total()) + "x" +
                         std::to_string(config.feature_dim) + "]");
  }
  const ModelVars vars = bind_params(tape, config, params);
  const DropoutContext drop{options.mode, config.dropout_rate, options.rng};
  if (drop.mode == Mode::Train && drop.rate > 0.0 && drop.rng == nullptr) {
    throw ArgumentError("forward: train mode with dropout needs an Rng");
  }

  Var question = encode_question(vars, input.question);
  Var features = tape.constant(feats);
  const std::size_t n = feats.rows();

  ForwardTrace trace;
  Var fused;
  switch (config.variant) {
    case Variant::SalAtt:
    case Variant::ConAtt: {
      Var weights = config.variant == Variant::SalAtt
                        ? preselect_weights(*vars.preselect, features)
                        : conv_preselect_weights(*vars.conv_preselect, features);
      trace.preselect_weights = weights.value();
      auto ewm = fuse_ewm_attention(question, apply_preselection(weights, features), vars.maps, drop);
      fused = ewm.fused;
      trace.attention_map = std::move(ewm.map);
      break;
    }
    case Variant::RegAtt: {
      auto ewm = fuse_ewm_attention(question, features, vars.maps, drop);
      fused = ewm.fused;
      trace.attention_map = std::move(ewm.map);
      break;
    }
    case Variant::TraAtt: {
      auto tra = fuse_traditional_attention(question, features, vars.maps, drop);
      fused = tra.fused;
      trace.attention_map = tra.alpha.value();
      break;
    }
    case Variant::Holistic:
      fused = fuse_holistic(question, features, vars.maps, drop);
      trace.attention_map = Tensor({n}, 1.0 / static_cast<double>(n));
      break;
  }
  trace.logits = classify(drop.apply(fused), vars.classifier_w, vars.classifier_b);
  return trace;
}

std::size_t argmax(const Tensor& logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

}  // namespace salatt
