// SPDX-License-Identifier: Apache-2.0
#include "salatt/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace salatt {

namespace {
double scalar_of(Var v, const char* what) {
  const Tensor& t = v.value();
  if (t.size() != 1) {
    throw DimensionError(std::string(what) + ": function must return a scalar, got " +
                         shape_to_string(t.shape()));
  }
  if (!std::isfinite(t[0])) {
    throw EvaluationError(std::string(what) + ": function value is not finite");
  }
  return t[0];
}

void update(GradCheckResult& result, std::size_t i, double analytic, double numeric) {
  const double err = relative_error(analytic, numeric);
  if (i == 0 || err > result.max_rel_error) {
    result.max_rel_error = err;
    result.worst_index = i;
    result.analytic = analytic;
    result.numeric = numeric;
  }
}
}  // namespace

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult grad_check(const ScalarFn& f, const Tensor& x, double h) {
  Tensor analytic;
  {
    Tape tape;
    Var leaf = tape.variable(x);
    Var out = f(tape, leaf);
    scalar_of(out, "grad_check");
    tape.backward(out);
    analytic = tape.grad(leaf);
  }
  auto eval_at = [&](const Tensor& point) {
    Tape tape;
    Var leaf = tape.variable(point);
    return scalar_of(f(tape, leaf), "grad_check");
  };

  GradCheckResult result;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = eval_at(probe);
    probe[i] = x[i] - h;
    const double down = eval_at(probe);
    probe[i] = x[i];
    update(result, i, analytic[i], (up - down) / (2.0 * h));
  }
  return result;
}

GradCheckResult grad_check_param(ParamStore& store, const std::string& name,
                                 const LossFn& loss, double h) {
  store.zero_grad();
  {
    Tape tape;
    Var out = loss(tape, store);
    scalar_of(out, "grad_check_param");
    tape.backward(out);
  }
  ParamEntry& entry = store.at(name);
  const Tensor analytic = entry.grad;
  store.zero_grad();

  auto eval_now = [&] {
    Tape tape;
    return scalar_of(loss(tape, store), "grad_check_param");
  };

  GradCheckResult result;
  for (std::size_t i = 0; i < entry.value.size(); ++i) {
    const double original = entry.value[i];
    entry.value[i] = original + h;
    const double up = eval_now();
    entry.value[i] = original - h;
    const double down = eval_now();
    entry.value[i] = original;
    update(result, i, analytic[i], (up - down) / (2.0 * h));
  }
  return result;
}

}  // namespace salatt
