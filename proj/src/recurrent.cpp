// SPDX-License-Identifier: Apache-2.0
#include "salatt/recurrent.hpp"

#include <algorithm>

namespace salatt {

namespace {
const char* const kGateNames[] = {"W_i", "W_f", "W_o", "W_u", "U_i", "U_f",
                                  "U_o", "U_u", "b_i", "b_f", "b_o", "b_u"};

Tensor uniform_tensor(Shape shape, Rng& rng, double range) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(-range, range);
  return t;
}

void check_block(Var v, const Shape& want, const char* what) {
  if (v.shape() != want) {
    throw DimensionError(std::string("lstm: ") + what + " has shape " + shape_to_string(v.shape()) + ", expected " +
                         shape_to_string(want));
  }
}

void check_cell(const LstmCellParams& p) {
  const std::size_t in = p.input_size(), hid = p.hidden_size();
  const Shape w{hid, in}, u{hid, hid}, b{hid};
  for (Var v : {p.W_i, p.W_f, p.W_o, p.W_u}) check_block(v, w, "W block");
  for (Var v : {p.U_i, p.U_f, p.U_o, p.U_u}) check_block(v, u, "U block");
  for (Var v : {p.b_i, p.b_f, p.b_o, p.b_u}) check_block(v, b, "bias");
}
}  // namespace

std::vector<std::string> lstm_param_names(const std::string& prefix) {
  std::vector<std::string> names;
  for (const char* n : kGateNames) names.push_back(prefix + "." + n);
  return names;
}

void register_lstm_cell(ParamStore& store, const std::string& prefix, std::size_t input,
                        std::size_t hidden, Rng& rng, double init_range) {
  const auto names = lstm_param_names(prefix);
  for (std::size_t k = 0; k < 4; ++k) store.add(names[k], uniform_tensor({hidden, input}, rng, init_range));
  for (std::size_t k = 4; k < 8; ++k) store.add(names[k], uniform_tensor({hidden, hidden}, rng, init_range));
  for (std::size_t k = 8; k < 12; ++k) store.add(names[k], Tensor({hidden}));
}

LstmCellParams bind_lstm_cell(Tape& tape, ParamStore& store, const std::string& prefix) {
  const auto n = lstm_param_names(prefix);
  auto p = [&](std::size_t k) { return tape.parameter(store.at(n[k])); };
  return LstmCellParams{p(0), p(1), p(2), p(3), p(4), p(5), p(6), p(7), p(8), p(9), p(10), p(11)};
}

LstmState zero_state(Tape& tape, std::size_t hidden) {
  return {tape.constant(Tensor({hidden})), tape.constant(Tensor({hidden}))};
}

LstmStepTrace lstm_cell_step_traced(const LstmCellParams& p, Var x, const LstmState& prev) {
  check_cell(p);
  const Shape hidden{p.hidden_size()};
  if (x.shape() != Shape{p.input_size()}) {
    throw DimensionError("lstm_cell_step: input " + shape_to_string(x.shape()) +
                         " does not match cell input size " + std::to_string(p.input_size()));
  }
  if (prev.h.shape() != hidden || prev.c.shape() != hidden) {
    throw DimensionError("lstm_cell_step: state " + shape_to_string(prev.h.shape()) + "/" +
                         shape_to_string(prev.c.shape()) + " does not match hidden size " +
                         std::to_string(p.hidden_size()));
  }
  Var i = sigmoid(affine_pair(p.W_i, x, p.U_i, prev.h, p.b_i));
  Var f = sigmoid(affine_pair(p.W_f, x, p.U_f, prev.h, p.b_f));
  Var o = sigmoid(affine_pair(p.W_o, x, p.U_o, prev.h, p.b_o));
  Var u = tanh_op(affine_pair(p.W_u, x, p.U_u, prev.h, p.b_u));
  Var c = add(ewmul(u, i), ewmul(prev.c, f));
  Var h = ewmul(o, tanh_op(c));
  return {{h, c}, i, f, o, u};
}

LstmState lstm_cell_step(const LstmCellParams& p, Var x, const LstmState& prev) {
  return lstm_cell_step_traced(p, x, prev).state;
}

LstmOutput lstm_forward(std::span<const LstmCellParams> layers, std::span<const Var> seq) {
  if (seq.empty()) throw ArgumentError("lstm_forward: empty input sequence");
  if (layers.empty()) throw ArgumentError("lstm_forward: no layers");
  for (std::size_t k = 1; k < layers.size(); ++k) {
    if (layers[k].input_size() != layers[k - 1].hidden_size()) {
      throw DimensionError("lstm_forward: layer " + std::to_string(k) + " input size " +
                           std::to_string(layers[k].input_size()) + " != layer " +
                           std::to_string(k - 1) + " hidden size " +
                           std::to_string(layers[k - 1].hidden_size()));
    }
  }
  Tape& tape = *seq.front().tape;
  LstmOutput out;
  std::vector<Var> current(seq.begin(), seq.end());
  for (const auto& layer : layers) {
    LstmState state = zero_state(tape, layer.hidden_size());
    std::vector<Var> next;
    next.reserve(current.size());
    for (Var x : current) {
      state = lstm_cell_step(layer, x, state);
      next.push_back(state.h);
    }
    out.final_states.push_back(state);
    current = std::move(next);
  }
  out.outputs = std::move(current);
  return out;
}

std::vector<Var> bilstm_forward(const BiLstmParams& p, std::span<const Var> seq) {
  if (seq.empty()) throw ArgumentError("bilstm_forward: empty input sequence");
  if (p.forward.input_size() != p.backward.input_size() ||
      p.forward.hidden_size() != p.backward.hidden_size()) {
    throw DimensionError("bilstm_forward: forward and backward cells differ in size");
  }
  const std::vector<Var> reversed(seq.rbegin(), seq.rend());
  const auto fwd = lstm_forward(std::span(&p.forward, 1), seq).outputs;
  const auto bwd = lstm_forward(std::span(&p.backward, 1), reversed).outputs;
  const std::size_t n = seq.size();
  std::vector<Var> out;
  out.reserve(n);
  // bwd[k] has consumed seq[n-1..n-1-k]; position t pairs with k = n-1-t.
  for (std::size_t t = 0; t < n; ++t) out.push_back(add(fwd[t], bwd[n - 1 - t]));
  return out;
}

Var question_final_encoding(std::span<const LstmCellParams> layers,
                            std::span<const Var> token_embeddings) {
  if (token_embeddings.empty()) throw ArgumentError("question_final_encoding: empty question");
  const auto run = lstm_forward(layers, token_embeddings);
  std::vector<Var> parts;
  parts.reserve(2 * run.final_states.size());
  for (const auto& s : run.final_states) parts.push_back(s.h);
  for (const auto& s : run.final_states) parts.push_back(s.c);
  return concat(parts);
}

}  // namespace salatt
