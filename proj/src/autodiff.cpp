// SPDX-License-Identifier: Apache-2.0
#include "salatt/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace salatt {

namespace {
std::atomic<bool> g_backward_fault{false};

void require(bool ok, const std::string& message) {
  if (!ok) throw DimensionError(message);
}

void require_vector(const Tensor& t, const char* op) {
  require(t.rank() == 1, std::string(op) + ": expected a vector, got " +
                             shape_to_string(t.shape()));
}

void require_matrix(const Tensor& t, const char* op) {
  require(t.rank() == 2, std::string(op) + ": expected a matrix, got " +
                             shape_to_string(t.shape()));
}

Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw ArgumentError("variable is not bound to a tape");
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) throw ArgumentError("operands live on different tapes");
  return tape_of(a);
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Accumulates g·vᵀ-style outer products: dW[p×q] += g[p] ⊗ x[q].
void add_outer(Tensor& dw, std::span<const double> g, std::span<const double> x) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] == 0.0) continue;
    double* out = &dw.at(i, 0);
    for (std::size_t j = 0; j < x.size(); ++j) out[j] += g[i] * x[j];
  }
}

/// dx[q] += Wᵀ[q×p]·g[p].
void add_transposed_matvec(std::span<double> dx, const Tensor& w, std::span<const double> g) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] == 0.0) continue;
    auto row = w.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) dx[j] += row[j] * g[i];
  }
}

void matvec_into(std::span<double> out, const Tensor& w, std::span<const double> x) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto row = w.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) acc += row[j] * x[j];
    out[i] += acc;
  }
}
}  // namespace

const Tensor& Var::value() const { return tape->value(index); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Tape::variable(Tensor value) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = true;
  return push(std::move(node));
}

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  return push(std::move(node));
}

Var Tape::parameter(ParamEntry& entry) {
  if (auto it = param_index_.find(&entry); it != param_index_.end()) {
    return Var{this, it->second};
  }
  Node node;
  node.external = &entry.value;
  node.param = &entry;
  node.requires_grad = true;
  Var v = push(std::move(node));
  param_index_.emplace(&entry, v.index);
  return v;
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  for (const Var& in : inputs) {
    if (in.tape != this) throw ArgumentError("operand recorded on a different tape");
    node.requires_grad = node.requires_grad || nodes_[in.index].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  return push(std::move(node));
}

const Tensor& Tape::value(std::size_t i) const {
  const Node& n = nodes_.at(i);
  return n.external ? *n.external : n.value;
}

Tensor Tape::grad(std::size_t i) const {
  const Node& n = nodes_.at(i);
  if (n.grad.empty()) return Tensor(value(i).shape());
  return n.grad;
}

Tensor& Tape::grad_ref(std::size_t i) {
  Node& n = nodes_[i];
  if (n.grad.empty()) n.grad = Tensor(value(i).shape());
  return n.grad;
}

void Tape::backward(Var root, double seed) {
  if (root.tape != this) throw ArgumentError("backward root is on a different tape");
  grad_ref(root.index).fill(seed);
  for (std::size_t i = root.index + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
  }
  for (auto& n : nodes_) {
    if (n.param && !n.grad.empty()) n.param->grad += n.grad;
  }
}

void Tape::clear() {
  nodes_.clear();
  param_index_.clear();
}

// ---------------------------------------------------------------------------
// Arithmetic

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same_shape(x, y, "add");
  Tensor out = x;
  out += y;
  return t.record(std::move(out), {a, b}, [ai = a.index, bi = b.index](Tape& tp, std::size_t self) {
    const Tensor g = tp.grad_ref(self);
    if (tp.requires_grad(ai)) tp.grad_ref(ai) += g;
    if (tp.requires_grad(bi)) tp.grad_ref(bi) += g;
  });
}

Var scale(Var a, double factor) {
  Tape& t = tape_of(a);
  Tensor out = a.value();
  out *= factor;
  return t.record(std::move(out), {a}, [ai = a.index, factor](Tape& tp, std::size_t self) {
    Tensor g = tp.grad_ref(self);
    g *= factor;
    tp.grad_ref(ai) += g;
  });
}

Var ewmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same_shape(x, y, "ewmul");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return t.record(std::move(out), {a, b}, [ai = a.index, bi = b.index](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    const Tensor& x = tp.value(ai);
    const Tensor& y = tp.value(bi);
    if (tp.requires_grad(ai)) {
      Tensor& dx = tp.grad_ref(ai);
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * y[i];
    }
    if (tp.requires_grad(bi)) {
      Tensor& dy = tp.grad_ref(bi);
      for (std::size_t i = 0; i < g.size(); ++i) dy[i] += g[i] * x[i];
    }
  });
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_matrix(x, "matmul");
  require_matrix(y, "matmul");
  require(x.cols() == y.rows(), "matmul: inner dimensions disagree for " +
                                    shape_to_string(x.shape()) + " x " +
                                    shape_to_string(y.shape()));
  const std::size_t p = x.rows(), q = x.cols(), r = y.cols();
  Tensor out({p, r});
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t k = 0; k < q; ++k) {
      const double xik = x.at(i, k);
      for (std::size_t j = 0; j < r; ++j) out.at(i, j) += xik * y.at(k, j);
    }
  }
  return t.record(std::move(out), {a, b}, [ai = a.index, bi = b.index](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    const Tensor& x = tp.value(ai);
    const Tensor& y = tp.value(bi);
    const std::size_t p = x.rows(), q = x.cols(), r = y.cols();
    if (tp.requires_grad(ai)) {
      Tensor& dx = tp.grad_ref(ai);
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t k = 0; k < q; ++k) {
          double acc = 0.0;
          for (std::size_t j = 0; j < r; ++j) acc += g.at(i, j) * y.at(k, j);
          dx.at(i, k) += acc;
        }
    }
    if (tp.requires_grad(bi)) {
      Tensor& dy = tp.grad_ref(bi);
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t k = 0; k < q; ++k) {
          const double xik = x.at(i, k);
          for (std::size_t j = 0; j < r; ++j) dy.at(k, j) += xik * g.at(i, j);
        }
    }
  });
}

Var matvec(Var w, Var x) {
  Tape& t = tape_of(w, x);
  const Tensor& m = w.value();
  const Tensor& v = x.value();
  require_matrix(m, "matvec");
  require_vector(v, "matvec");
  require(m.cols() == v.size(), "matvec: shape mismatch " + shape_to_string(m.shape()) +
                                    " x " + shape_to_string(v.shape()));
  Tensor out({m.rows()});
  matvec_into(out.data(), m, v.data());
  return t.record(std::move(out), {w, x}, [wi = w.index, xi = x.index](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    if (tp.requires_grad(wi)) add_outer(tp.grad_ref(wi), g.data(), tp.value(xi).data());
    if (tp.requires_grad(xi)) add_transposed_matvec(tp.grad_ref(xi).data(), tp.value(wi), g.data());
  });
}

Var affine(Var w, Var x, Var b) {
  Tape& t = tape_of(w, x);
  tape_of(w, b);
  const Tensor& m = w.value();
  const Tensor& v = x.value();
  const Tensor& bias = b.value();
  require_matrix(m, "affine");
  require_vector(v, "affine");
  require(m.cols() == v.size() && bias.rank() == 1 && bias.size() == m.rows(),
          "affine: shape mismatch W" + shape_to_string(m.shape()) + " x" +
              shape_to_string(v.shape()) + " b" + shape_to_string(bias.shape()));
  Tensor out = bias;
  matvec_into(out.data(), m, v.data());
  return t.record(std::move(out), {w, x, b},
                  [wi = w.index, xi = x.index, bi = b.index](Tape& tp, std::size_t self) {
                    const Tensor& g = tp.grad_ref(self);
                    if (tp.requires_grad(wi)) add_outer(tp.grad_ref(wi), g.data(), tp.value(xi).data());
                    if (tp.requires_grad(xi))
                      add_transposed_matvec(tp.grad_ref(xi).data(), tp.value(wi), g.data());
                    if (tp.requires_grad(bi)) tp.grad_ref(bi) += g;
                  });
}

Var affine_pair(Var w, Var x, Var u, Var h, Var b) {
  Tape& t = tape_of(w, x);
  tape_of(u, h);
  tape_of(w, b);
  const Tensor& wm = w.value();
  const Tensor& um = u.value();
  const Tensor& xv = x.value();
  const Tensor& hv = h.value();
  const Tensor& bias = b.value();
  require_matrix(wm, "affine_pair");
  require_matrix(um, "affine_pair");
  require_vector(xv, "affine_pair");
  require_vector(hv, "affine_pair");
  require(wm.cols() == xv.size() && um.cols() == hv.size() && wm.rows() == um.rows() &&
              bias.rank() == 1 && bias.size() == wm.rows(),
          "affine_pair: shape mismatch W" + shape_to_string(wm.shape()) + " x" +
              shape_to_string(xv.shape()) + " U" + shape_to_string(um.shape()) + " h" +
              shape_to_string(hv.shape()) + " b" + shape_to_string(bias.shape()));
  Tensor out = bias;
  matvec_into(out.data(), wm, xv.data());
  matvec_into(out.data(), um, hv.data());
  return t.record(std::move(out), {w, x, u, h, b},
                  [wi = w.index, xi = x.index, ui = u.index, hi = h.index, bi = b.index](
                      Tape& tp, std::size_t self) {
                    const Tensor& g = tp.grad_ref(self);
                    if (tp.requires_grad(wi)) add_outer(tp.grad_ref(wi), g.data(), tp.value(xi).data());
                    if (tp.requires_grad(xi))
                      add_transposed_matvec(tp.grad_ref(xi).data(), tp.value(wi), g.data());
                    if (tp.requires_grad(ui)) add_outer(tp.grad_ref(ui), g.data(), tp.value(hi).data());
                    if (tp.requires_grad(hi))
                      add_transposed_matvec(tp.grad_ref(hi).data(), tp.value(ui), g.data());
                    if (tp.requires_grad(bi)) tp.grad_ref(bi) += g;
                  });
}

Var linear_rows(Var x, Var w, Var b) {
  Tape& t = tape_of(x, w);
  tape_of(w, b);
  const Tensor& xm = x.value();
  const Tensor& wm = w.value();
  const Tensor& bias = b.value();
  require_matrix(xm, "linear_rows");
  require_matrix(wm, "linear_rows");
  require(wm.cols() == xm.cols() && bias.rank() == 1 && bias.size() == wm.rows(),
          "linear_rows: shape mismatch X" + shape_to_string(xm.shape()) + " W" +
              shape_to_string(wm.shape()) + " b" + shape_to_string(bias.shape()));
  const std::size_t n = xm.rows(), out_dim = wm.rows();
  Tensor out({n, out_dim});
  for (std::size_t r = 0; r < n; ++r) {
    auto dst = out.row(r);
    std::copy(bias.data().begin(), bias.data().end(), dst.begin());
    matvec_into(dst, wm, xm.row(r));
  }
  return t.record(std::move(out), {x, w, b},
                  [xi = x.index, wi = w.index, bi = b.index](Tape& tp, std::size_t self) {
                    const Tensor& g = tp.grad_ref(self);
                    const Tensor& xm = tp.value(xi);
                    const Tensor& wm = tp.value(wi);
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                      auto gr = g.row(r);
                      if (tp.requires_grad(wi)) add_outer(tp.grad_ref(wi), gr, xm.row(r));
                      if (tp.requires_grad(xi)) add_transposed_matvec(tp.grad_ref(xi).row(r), wm, gr);
                      if (tp.requires_grad(bi)) {
                        Tensor& db = tp.grad_ref(bi);
                        for (std::size_t j = 0; j < gr.size(); ++j) db[j] += gr[j];
                      }
                    }
                  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const Tensor& m = a.value();
  require_matrix(m, "transpose");
  Tensor out({m.cols(), m.rows()});
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out.at(j, i) = m.at(i, j);
  return t.record(std::move(out), {a}, [ai = a.index](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    Tensor& d = tp.grad_ref(ai);
    for (std::size_t i = 0; i < d.rows(); ++i)
      for (std::size_t j = 0; j < d.cols(); ++j) d.at(i, j) += g.at(j, i);
  });
}

Var reshape(Var a, Shape shape) {
  Tape& t = tape_of(a);
  Tensor out = a.value().reshaped(std::move(shape));
  return t.record(std::move(out), {a}, [ai = a.index](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    Tensor& d = tp.grad_ref(ai);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  double total = 0.0;
  for (double v : x.data()) total += v;
  return t.record(Tensor::scalar(total), {a}, [ai = a.index](Tape& tp, std::size_t self) {
    const double g = tp.grad_ref(self)[0];
    Tensor& d = tp.grad_ref(ai);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g;
  });
}

Var dot(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same_shape(x, y, "dot");
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += x[i] * y[i];
  return t.record(Tensor::scalar(total), {a, b}, [ai = a.index, bi = b.index](Tape& tp, std::size_t self) {
    const double g = tp.grad_ref(self)[0];
    const Tensor& x = tp.value(ai);
    const Tensor& y = tp.value(bi);
    if (tp.requires_grad(ai)) {
      Tensor& dx = tp.grad_ref(ai);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g * y[i];
    }
    if (tp.requires_grad(bi)) {
      Tensor& dy = tp.grad_ref(bi);
      for (std::size_t i = 0; i < dy.size(); ++i) dy[i] += g * x[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Nonlinearities

Var sigmoid(Var x) {
  Tape& t = tape_of(x);
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = stable_sigmoid(in[i]);
  return t.record(std::move(out), {x}, [xi = x.index](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    const Tensor& y = tp.value(self);
    Tensor& d = tp.grad_ref(xi);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var tanh_op(Var x) {
  Tape& t = tape_of(x);
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);
  return t.record(std::move(out), {x}, [xi = x.index](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    const Tensor& y = tp.value(self);
    Tensor& d = tp.grad_ref(xi);
    const double skew = g_backward_fault.load(std::memory_order_relaxed) ? 1.01 : 1.0;
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += skew * g[i] * (1.0 - y[i] * y[i]);
  });
}

Var softmax(Var x) {
  Tape& t = tape_of(x);
  const Tensor& in = x.value();
  require_vector(in, "softmax");
  const double peak = *std::max_element(in.data().begin(), in.data().end());
  Tensor out(in.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = std::exp(in[i] - peak);
    total += out[i];
  }
  out *= 1.0 / total;
  return t.record(std::move(out), {x}, [xi = x.index](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    const Tensor& y = tp.value(self);
    double inner = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) inner += g[i] * y[i];
    Tensor& d = tp.grad_ref(xi);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += y[i] * (g[i] - inner);
  });
}

// ---------------------------------------------------------------------------
// Structural

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ArgumentError("concat: empty list of parts");
  Tape& t = tape_of(parts.front());
  std::vector<double> data;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    require_vector(v, "concat");
    data.insert(data.end(), v.data().begin(), v.data().end());
  }
  std::vector<std::size_t> indices;
  indices.reserve(parts.size());
  for (const Var& p : parts) indices.push_back(p.index);
  return t.record(Tensor::vector(std::move(data)), parts,
                  [indices = std::move(indices)](Tape& tp, std::size_t self) {
                    const Tensor& g = tp.grad_ref(self);
                    std::size_t offset = 0;
                    for (std::size_t pi : indices) {
                      const std::size_t n = tp.value(pi).size();
                      if (tp.requires_grad(pi)) {
                        Tensor& d = tp.grad_ref(pi);
                        for (std::size_t i = 0; i < n; ++i) d[i] += g[offset + i];
                      }
                      offset += n;
                    }
                  });
}

Var row(Var matrix, std::size_t index) {
  Tape& t = tape_of(matrix);
  const Tensor& m = matrix.value();
  require_matrix(m, "row");
  if (index >= m.rows()) {
    throw ArgumentError("row: index " + std::to_string(index) + " out of range for " +
                        shape_to_string(m.shape()));
  }
  auto r = m.row(index);
  Tensor out({m.cols()}, std::vector<double>(r.begin(), r.end()));
  return t.record(std::move(out), {matrix}, [mi = matrix.index, index](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    auto d = tp.grad_ref(mi).row(index);
    for (std::size_t j = 0; j < d.size(); ++j) d[j] += g[j];
  });
}

Var broadcast_rows(Var v, std::size_t rows) {
  Tape& t = tape_of(v);
  const Tensor& x = v.value();
  require_vector(x, "broadcast_rows");
  if (rows == 0) throw ArgumentError("broadcast_rows: row count must be positive");
  Tensor out({rows, x.size()});
  for (std::size_t r = 0; r < rows; ++r) std::copy(x.data().begin(), x.data().end(), out.row(r).begin());
  return t.record(std::move(out), {v}, [vi = v.index](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    Tensor& d = tp.grad_ref(vi);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      auto gr = g.row(r);
      for (std::size_t j = 0; j < gr.size(); ++j) d[j] += gr[j];
    }
  });
}

Var scale_rows(Var weights, Var matrix) {
  Tape& t = tape_of(weights, matrix);
  const Tensor& w = weights.value();
  const Tensor& m = matrix.value();
  require_vector(w, "scale_rows");
  require_matrix(m, "scale_rows");
  require(w.size() == m.rows(), "scale_rows: " + std::to_string(w.size()) + " weights for " +
                                    shape_to_string(m.shape()) + " matrix");
  Tensor out = m;
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (double& v : out.row(r)) v *= w[r];
  return t.record(std::move(out), {weights, matrix},
                  [wi = weights.index, mi = matrix.index](Tape& tp, std::size_t self) {
                    const Tensor& g = tp.grad_ref(self);
                    const Tensor& w = tp.value(wi);
                    const Tensor& m = tp.value(mi);
                    if (tp.requires_grad(wi)) {
                      Tensor& dw = tp.grad_ref(wi);
                      for (std::size_t r = 0; r < m.rows(); ++r) {
                        auto gr = g.row(r);
                        auto mr = m.row(r);
                        double acc = 0.0;
                        for (std::size_t j = 0; j < gr.size(); ++j) acc += gr[j] * mr[j];
                        dw[r] += acc;
                      }
                    }
                    if (tp.requires_grad(mi)) {
                      Tensor& dm = tp.grad_ref(mi);
                      for (std::size_t r = 0; r < m.rows(); ++r) {
                        auto gr = g.row(r);
                        auto dr = dm.row(r);
                        for (std::size_t j = 0; j < gr.size(); ++j) dr[j] += gr[j] * w[r];
                      }
                    }
                  });
}

Var mean_rows(Var matrix) {
  Tape& t = tape_of(matrix);
  const Tensor& m = matrix.value();
  require_matrix(m, "mean_rows");
  Tensor out({m.cols()});
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto mr = m.row(r);
    for (std::size_t j = 0; j < mr.size(); ++j) out[j] += mr[j];
  }
  out *= 1.0 / static_cast<double>(m.rows());
  return t.record(std::move(out), {matrix}, [mi = matrix.index](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    Tensor& d = tp.grad_ref(mi);
    const double inv = 1.0 / static_cast<double>(d.rows());
    for (std::size_t r = 0; r < d.rows(); ++r) {
      auto dr = d.row(r);
      for (std::size_t j = 0; j < dr.size(); ++j) dr[j] += g[j] * inv;
    }
  });
}

MaxPoolResult max_pool_rows(Var x) {
  Tape& t = tape_of(x);
  const Tensor& m = x.value();
  require_matrix(m, "max_pool_rows");
  const std::size_t n = m.rows(), d = m.cols();
  std::vector<std::size_t> argmax(d, 0);
  Tensor out({d});
  for (std::size_t j = 0; j < d; ++j) {
    double best = m.at(0, j);
    for (std::size_t r = 1; r < n; ++r) {
      if (m.at(r, j) > best) {
        best = m.at(r, j);
        argmax[j] = r;
      }
    }
    out[j] = best;
  }
  Var v = t.record(std::move(out), {x}, [xi = x.index, argmax](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    Tensor& dx = tp.grad_ref(xi);
    for (std::size_t j = 0; j < argmax.size(); ++j) dx.at(argmax[j], j) += g[j];
  });
  return {v, std::move(argmax)};
}

Var cross_entropy(Var logits, std::size_t label) {
  Tape& t = tape_of(logits);
  const Tensor& z = logits.value();
  require_vector(z, "cross_entropy");
  if (label >= z.size()) {
    throw ArgumentError("cross_entropy: label " + std::to_string(label) +
                        " out of range for " + std::to_string(z.size()) + " classes");
  }
  const double peak = *std::max_element(z.data().begin(), z.data().end());
  double total = 0.0;
  for (double v : z.data()) total += std::exp(v - peak);
  const double log_norm = peak + std::log(total);
  return t.record(Tensor::scalar(log_norm - z[label]), {logits},
                  [zi = logits.index, label, log_norm](Tape& tp, std::size_t self) {
                    const double g = tp.grad_ref(self)[0];
                    const Tensor& z = tp.value(zi);
                    Tensor& dz = tp.grad_ref(zi);
                    for (std::size_t i = 0; i < z.size(); ++i) {
                      const double p = std::exp(z[i] - log_norm);
                      dz[i] += g * (p - (i == label ? 1.0 : 0.0));
                    }
                  });
}

Var dropout(Var x, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ArgumentError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::Eval || rate == 0.0) return x;
  Tape& t = tape_of(x);
  const Tensor& in = x.value();
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor mask(in.shape());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
  Tensor out(in.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] * mask[i];
  return t.record(std::move(out), {x}, [xi = x.index, mask = std::move(mask)](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad_ref(self);
    Tensor& d = tp.grad_ref(xi);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * mask[i];
  });
}

namespace testing {
void set_backward_fault(bool enabled) { g_backward_fault.store(enabled); }
bool backward_fault() { return g_backward_fault.load(); }
}  // namespace testing

}  // namespace salatt
