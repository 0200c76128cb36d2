// SPDX-License-Identifier: Apache-2.0
#include "salatt/trainer.hpp"

#include <chrono>

namespace salatt {

TrainOptions TrainOptions::desk_profile() { return TrainOptions{}; }

TrainOptions TrainOptions::paper_profile() {
  TrainOptions o;
  o.batch_size = 500;
  o.eval_every = 1000;
  o.patience = 5000;
  o.max_iterations = 200000;
  o.optimizer.learning_rate = 3e-4;
  return o;
}

double accumulate_batch_gradients(const ModelConfig& config, ParamStore& params,
                                  std::span<const VqaSample* const> batch, Rng& rng) {
  if (batch.empty()) throw ArgumentError("train_step: empty batch");
  const double weight = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  Tape tape;
  for (const VqaSample* s : batch) {
    if (!s->answer_label) throw ArgumentError("train_step: sample answer '" + s->answer + "' has no label");
    tape.clear();
    const auto trace =
        forward(tape, config, params, {s->features->features, s->question}, {Mode::Train, &rng});
    Var loss = cross_entropy(trace.logits, *s->answer_label);
    total += loss.value()[0];
    tape.backward(loss, weight);
  }
  return total * weight;
}

double train_step(const ModelConfig& config, ParamStore& params, std::span<const VqaSample* const> batch,
                  const RmsPropConfig& optimizer, Rng& rng) {
  params.zero_grad();
  const double loss = accumulate_batch_gradients(config, params, batch, rng);
  rmsprop_step(params, optimizer);
  return loss;
}

EvalResult evaluate(const ModelConfig& config, ParamStore& params, const Dataset& data, const AnswerVocab& vocab) {
  EvalResult result;
  result.samples = data.size();
  if (data.empty()) {
    result.empty = true;
    return result;
  }
  if (vocab.size() != config.answer_count) {
    throw ConfigError("answer vocabulary has " + std::to_string(vocab.size()) + " entries, model expects " +
                      std::to_string(config.answer_count));
  }
  double vqa = 0.0;
  std::size_t correct = 0;
  Tape tape;
  for (const auto& s : data) {
    tape.clear();
    const auto trace = forward(tape, config, params, {s.features->features, s.question});
    const std::size_t predicted = argmax(trace.logits.value());
    vqa += vqa_accuracy(vocab.answer(predicted), s.references);
    if (s.answer_label && *s.answer_label == predicted) ++correct;
  }
  const double n = static_cast<double>(data.size());
  result.vqa_accuracy = vqa / n;
  result.top1_accuracy = static_cast<double>(correct) / n;
  return result;
}

TrainState train_with_early_stopping(const ModelConfig& config, ParamStore& params, const Dataset& train,
                                     const Dataset& val, const AnswerVocab& vocab, const TrainOptions& options,
                                     const TrainHooks& hooks) {
  if (options.eval_every == 0) throw ArgumentError("eval_every must be positive");
  if (options.batch_size == 0) throw ArgumentError("batch_size must be positive");

  Dataset labeled;
  for (const auto& s : train) {
    if (s.answer_label) labeled.push_back(s);
  }
  if (labeled.empty() && options.max_iterations > 0) {
    throw ArgumentError("training set has no samples with in-vocabulary answers");
  }

  const auto start = std::chrono::steady_clock::now();
  const Rng root(options.seed);
  TrainState state;
  bool have_best = false;
  double loss_sum = 0.0;
  std::size_t loss_count = 0;

  for (std::size_t it = 0;; ++it) {
    if (it % options.eval_every == 0 || it == options.max_iterations) {
      const EvalResult r = hooks.evaluator ? hooks.evaluator(params, it) : evaluate(config, params, val, vocab);
      EvalRecord rec;
      rec.iteration = it;
      if (loss_count > 0) rec.train_loss = loss_sum / static_cast<double>(loss_count);
      rec.val_vqa_accuracy = r.vqa_accuracy;
      rec.val_top1_accuracy = r.top1_accuracy;
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      state.history.push_back(rec);
      if (hooks.on_evaluation) hooks.on_evaluation(rec);
      loss_sum = 0.0;
      loss_count = 0;

      if (!have_best || r.vqa_accuracy > state.best_val_accuracy) {
        have_best = true;
        state.best_val_accuracy = r.vqa_accuracy;
        state.best_iteration = it;
        state.best_params = params.snapshot();
      } else if (it - state.best_iteration >= options.patience) {
        state.stopped_early = true;
        state.iteration = it;
        break;
      }
    }
    if (it >= options.max_iterations) {
      state.iteration = it;
      break;
    }
    Rng batch_rng = root.split(2 * it);
    Rng dropout_rng = root.split(2 * it + 1);
    const auto batch = sample_batch(labeled, options.batch_size, batch_rng);
    loss_sum += train_step(config, params, batch, options.optimizer, dropout_rng);
    ++loss_count;
  }
  return state;
}

}  // namespace salatt
