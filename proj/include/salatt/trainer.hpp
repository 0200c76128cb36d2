// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "salatt/dataset.hpp"
#include "salatt/model.hpp"
#include "salatt/param_store.hpp"

namespace salatt {

struct TrainOptions {
  RmsPropConfig optimizer{1e-3};
  std::size_t batch_size = 32;
  std::size_t eval_every = 100;
  std::size_t patience = 500;
  std::size_t max_iterations = 2000;
  std::uint64_t seed = 42;

  /// Batch 32, evaluate every 100, patience 500, learning rate 1e-3.
  static TrainOptions desk_profile();
  /// Batch 500, evaluate every 1000, stop after 5000 without improvement,
  /// learning rate 3e-4.
  static TrainOptions paper_profile();
};

/// Mean cross-entropy over `batch`, followed by one RMSprop update.
/// Returns the loss measured before the update. Every sample must carry an
/// answer label. Dropout masks are drawn from `rng`.
double train_step(const ModelConfig& config, ParamStore& params, std::span<const VqaSample* const> batch,
                  const RmsPropConfig& optimizer, Rng& rng);

/// Mean loss and parameter gradients (accumulated into `params`) without
/// updating; train_step is this followed by rmsprop_step.
double accumulate_batch_gradients(const ModelConfig& config, ParamStore& params,
                                  std::span<const VqaSample* const> batch, Rng& rng);

struct EvalResult {
  double vqa_accuracy = 0.0;
  double top1_accuracy = 0.0;
  std::size_t samples = 0;
  bool empty = false;  // no samples; both accuracies are reported as 0
};

/// Eval-mode forward on every sample; prediction is the arg-max logit.
EvalResult evaluate(const ModelConfig& config, ParamStore& params, const Dataset& data, const AnswerVocab& vocab);

struct EvalRecord {
  std::size_t iteration = 0;
  double train_loss = std::numeric_limits<double>::quiet_NaN();  // mean since previous evaluation
  double val_vqa_accuracy = 0.0;
  double val_top1_accuracy = 0.0;
  double seconds = 0.0;
};

struct TrainState {
  std::size_t iteration = 0;
  double best_val_accuracy = 0.0;
  std::size_t best_iteration = 0;
  ParamStore best_params;
  std::vector<EvalRecord> history;
  bool stopped_early = false;
};

struct TrainHooks {
  /// Replaces `evaluate` on the validation set when set.
  std::function<EvalResult(ParamStore&, std::size_t iteration)> evaluator;
  std::function<void(const EvalRecord&)> on_evaluation;
};

/// Evaluates at iteration 0 and every `eval_every` iterations (and at the
/// cap). An evaluation that does not strictly improve the best validation
/// VQA accuracy stops training once iteration − best_iteration ≥ patience.
/// `params` ends at the last trained state; the best snapshot is returned.
TrainState train_with_early_stopping(const ModelConfig& config, ParamStore& params, const Dataset& train,
                                     const Dataset& val, const AnswerVocab& vocab, const TrainOptions& options,
                                     const TrainHooks& hooks = {});

}  // namespace salatt
