// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "salatt/autodiff.hpp"

namespace salatt {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;  // at worst_index
  double numeric = 0.0;   // at worst_index
};

/// Relative error with the denominator floored at 1e-8.
double relative_error(double analytic, double numeric);

/// Compares the tape gradient of a scalar function of `x` with central
/// differences (f(x+h·eᵢ) − f(x−h·eᵢ)) / 2h at every coordinate.
///
/// `f` builds its result on the supplied tape from the leaf it is given and
/// must return a one-element Var. Throws EvaluationError if f is not finite.
using ScalarFn = std::function<Var(Tape&, Var)>;
GradCheckResult grad_check(const ScalarFn& f, const Tensor& x, double h = 1e-5);

/// Same check for one named block of a ParamStore. `loss` builds the scalar
/// from the store's current values; the block is perturbed in place and
/// restored afterwards.
using LossFn = std::function<Var(Tape&, ParamStore&)>;
GradCheckResult grad_check_param(ParamStore& store, const std::string& name,
                                 const LossFn& loss, double h = 1e-5);

}  // namespace salatt
