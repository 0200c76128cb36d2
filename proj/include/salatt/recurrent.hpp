// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "salatt/autodiff.hpp"

namespace salatt {

/// Gate weights of one LSTM cell, bound to a tape.
///
/// W* are [hidden×input], U* are [hidden×hidden], b* are [hidden]. The
/// suffixes name the input, forget and output gates and the cell candidate.
struct LstmCellParams {
  Var W_i, W_f, W_o, W_u;
  Var U_i, U_f, U_o, U_u;
  Var b_i, b_f, b_o, b_u;

  std::size_t input_size() const { return W_i.shape()[1]; }
  std::size_t hidden_size() const { return W_i.shape()[0]; }
};

struct LstmState {
  Var h;
  Var c;
};

struct LstmStepTrace {
  LstmState state;
  Var input_gate, forget_gate, output_gate, candidate;
};

struct BiLstmParams {
  LstmCellParams forward;
  LstmCellParams backward;
};

/// Names of the twelve tensors of a cell stored under `prefix`.
std::vector<std::string> lstm_param_names(const std::string& prefix);

/// Adds a cell's tensors to `store`, uniform on [-init_range, init_range)
/// for weights and zero for biases.
void register_lstm_cell(ParamStore& store, const std::string& prefix, std::size_t input,
                        std::size_t hidden, Rng& rng, double init_range);
LstmCellParams bind_lstm_cell(Tape& tape, ParamStore& store, const std::string& prefix);

LstmState zero_state(Tape& tape, std::size_t hidden);

/// One step of the gated update:
///   i,f,o = σ(W x + U h₋ + b),  u = tanh(Wᵘ x + Uᵘ h₋ + bᵘ),
///   c = u ⊙ i + c₋ ⊙ f,          h = o ⊙ tanh(c).
LstmState lstm_cell_step(const LstmCellParams& p, Var x, const LstmState& prev);
LstmStepTrace lstm_cell_step_traced(const LstmCellParams& p, Var x, const LstmState& prev);

struct LstmOutput {
  std::vector<Var> outputs;             // top layer, one per step
  std::vector<LstmState> final_states;  // one per layer, bottom first
};

/// Stacked LSTM from zero initial states; layer k reads layer k−1's outputs.
LstmOutput lstm_forward(std::span<const LstmCellParams> layers, std::span<const Var> seq);

/// Bidirectional pass whose output at step t is the forward hidden state at
/// t plus the backward hidden state computed at the mirrored position, so
/// every output depends on the whole sequence.
std::vector<Var> bilstm_forward(const BiLstmParams& p, std::span<const Var> seq);

/// Final hidden and cell vectors of every layer, ordered h₁..h_l, c₁..c_l;
/// length 2·l·r.
Var question_final_encoding(std::span<const LstmCellParams> layers,
                            std::span<const Var> token_embeddings);

}  // namespace salatt
