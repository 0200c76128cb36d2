// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "salatt/autodiff.hpp"
#include "salatt/recurrent.hpp"
#include "salatt/regions.hpp"

namespace salatt {

/// The full model and its four ablations.
///   SalAtt   BiLSTM pre-selection, then element-wise-product attention
///   RegAtt   element-wise-product attention without pre-selection
///   ConAtt   per-region shared linear pre-selection, then EWM attention
///   TraAtt   inner-product soft attention, attended vector ⧺ question
///   Holistic mean region feature fused with the question, no attention
enum class Variant { SalAtt, Holistic, TraAtt, RegAtt, ConAtt };

std::string_view variant_name(Variant v);
/// Throws ConfigError listing the accepted names.
Variant parse_variant(std::string_view name);
std::span<const Variant> all_variants();

struct ModelConfig {
  Variant variant = Variant::SalAtt;
  std::size_t feature_dim = 16;  // d_I
  std::size_t embed_dim = 16;
  std::size_t question_layers = 1;  // l
  std::size_t question_hidden = 16;  // r
  std::size_t common_dim = 32;  // d_C
  std::size_t vocab_size = 16;
  std::size_t answer_count = 4;
  double dropout_rate = 0.1;
  RegionGrid grid{4, 2, 1};

  std::size_t question_dim() const { return 2 * question_layers * question_hidden; }
  std::size_t classifier_input_dim() const;
  void validate() const;
};

/// Name and shape of every parameter tensor the variant owns.
std::vector<std::pair<std::string, Shape>> expected_param_shapes(const ModelConfig& config);

/// Weights uniform on [-init_range, init_range), biases zero.
ParamStore init_params(const ModelConfig& config, Rng& rng, double init_range = 0.08);

/// Throws ConfigError naming the block with the expected and found shapes.
void check_params(const ModelConfig& config, const ParamStore& params);

struct CommonMaps {
  Var visual_w, visual_b;      // [d_C×d_I], [d_C]
  Var question_w, question_b;  // [d_C×d_Q], [d_C]
};

/// Parameters of one variant bound to a tape.
struct ModelVars {
  Var embedding;
  std::vector<LstmCellParams> question_layers;
  std::optional<BiLstmParams> preselect;
  std::optional<Var> conv_preselect;  // [1×d_I]
  CommonMaps maps;
  Var classifier_w, classifier_b;
};

ModelVars bind_params(Tape& tape, const ModelConfig& config, ParamStore& params);

/// Dropout settings threaded through the fusion layers.
struct DropoutContext {
  Mode mode = Mode::Eval;
  double rate = 0.0;
  Rng* rng = nullptr;

  Var apply(Var x) const;
};

/// Region interest weights: one scalar per region from the 1-unit BiLSTM
/// run over the row-major region sequence, softmax-normalised.
Var preselect_weights(const BiLstmParams& p, Var features);
/// Scales region row i by weights[i].
Var apply_preselection(Var weights, Var features);
/// Shared linear scorer per region followed by softmax. There is no bias:
/// softmax would cancel it.
Var conv_preselect_weights(Var w, Var features);

struct EwmFusion {
  Var fused;        // [d_C]
  Var per_region;   // [N×d_C] element-wise products before pooling
  Tensor map;       // [N] fraction of the d_C columns won by each region
};
/// vᵢ = tanh(V fᵢ + b_v), q' = tanh(Q q + b_q), fusedᵢ = vᵢ ⊙ q', then a
/// column-wise max over regions.
EwmFusion fuse_ewm_attention(Var question, Var features, const CommonMaps& maps,
                             const DropoutContext& drop = {});

struct TraditionalFusion {
  Var fused;  // [2·d_C] = attended visual ⧺ mapped question
  Var alpha;  // [N]
};
TraditionalFusion fuse_traditional_attention(Var question, Var features, const CommonMaps& maps,
                                             const DropoutContext& drop = {});

/// Mean region feature mapped and multiplied with the mapped question.
Var fuse_holistic(Var question, Var features, const CommonMaps& maps, const DropoutContext& drop = {});

Var classify(Var fused, Var w, Var b);

/// Embeds tokens and runs the question LSTM; returns the 2·l·r encoding.
Var encode_question(const ModelVars& vars, std::span<const std::size_t> tokens);

struct ModelInput {
  const Tensor& features;  // [n²×d_I]
  std::span<const std::size_t> question;
};

struct ForwardTrace {
  std::optional<Tensor> preselect_weights;
  Tensor attention_map;
  Var logits;
};

struct ForwardOptions {
  Mode mode = Mode::Eval;
  Rng* rng = nullptr;  // required in train mode when dropout_rate > 0
};

ForwardTrace forward(Tape& tape, const ModelConfig& config, ParamStore& params, const ModelInput& input,
                     const ForwardOptions& options = {});

/// Index of the largest logit; ties go to the lowest index.
std::size_t argmax(const Tensor& logits);

}  // namespace salatt
