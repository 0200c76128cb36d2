// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "salatt/param_store.hpp"

namespace salatt::test {

using Vec = std::vector<double>;

// Plain-array LSTM written straight from the gate equations, sharing no code
// with the library.
struct RefCell {
  std::size_t in = 0, hid = 0;
  // Gate order: input, forget, output, candidate.
  std::array<Vec, 4> W, U, b;
};

inline double ref_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct RefState {
  Vec h, c;
};

inline RefState ref_step(const RefCell& p, const Vec& x, const RefState& prev) {
  std::array<Vec, 4> pre;
  for (int g = 0; g < 4; ++g) {
    pre[g].assign(p.hid, 0.0);
    for (std::size_t r = 0; r < p.hid; ++r) {
      double acc = p.b[g][r];
      for (std::size_t k = 0; k < p.in; ++k) acc += p.W[g][r * p.in + k] * x[k];
      for (std::size_t k = 0; k < p.hid; ++k) acc += p.U[g][r * p.hid + k] * prev.h[k];
      pre[g][r] = acc;
    }
  }
  RefState next{Vec(p.hid), Vec(p.hid)};
  for (std::size_t r = 0; r < p.hid; ++r) {
    const double i = ref_sigmoid(pre[0][r]);
    const double f = ref_sigmoid(pre[1][r]);
    const double o = ref_sigmoid(pre[2][r]);
    const double u = std::tanh(pre[3][r]);
    next.c[r] = u * i + prev.c[r] * f;
    next.h[r] = o * std::tanh(next.c[r]);
  }
  return next;
}

inline std::vector<RefState> ref_run(const RefCell& p, const std::vector<Vec>& seq) {
  RefState s{Vec(p.hid, 0.0), Vec(p.hid, 0.0)};
  std::vector<RefState> out;
  for (const auto& x : seq) {
    s = ref_step(p, x, s);
    out.push_back(s);
  }
  return out;
}

inline RefCell ref_from_store(const ParamStore& store, const std::string& prefix) {
  RefCell c;
  const char* gates = "ifou";
  for (int g = 0; g < 4; ++g) {
    const std::string sfx(1, gates[g]);
    const Tensor& W = store.at(prefix + ".W_" + sfx).value;
    c.hid = W.shape()[0];
    c.in = W.shape()[1];
    c.W[g].assign(W.data().begin(), W.data().end());
    const Tensor& U = store.at(prefix + ".U_" + sfx).value;
    c.U[g].assign(U.data().begin(), U.data().end());
    const Tensor& b = store.at(prefix + ".b_" + sfx).value;
    c.b[g].assign(b.data().begin(), b.data().end());
  }
  return c;
}

}  // namespace salatt::test
