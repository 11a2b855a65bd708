#pragma once

#include <functional>

#include "dal/matrix.hpp"

namespace dal {

// Central finite differences of a scalar function, one entry at a time:
// (f(x + h e_k) - f(x - h e_k)) / (2h). Throws if f evaluates non-finite,
// naming the offending entry.
Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f, const Matrix& at,
                        double h = 1e-5);

// Symmetric relative error between an analytic and a numeric gradient:
// ||a - b||_2 / (||a||_2 + ||b||_2 + tiny). Zero for two zero gradients.
double grad_rel_error(const Matrix& analytic, const Matrix& numeric);

}  // namespace dal
