#pragma once

#include <functional>

#include "core/tensor.hpp"

namespace dasfft {

// Central-difference gradient oracle: (f(x+h*e_i) - f(x-h*e_i)) / 2h.
// Throws if f evaluates to a non-finite value near x.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h = 1e-5);

// max_i |a_i - b_i| / max(1e-8, max|a|, max|b|)
double grad_rel_err(const Tensor& analytic, const Tensor& numeric);

}  // namespace dasfft
