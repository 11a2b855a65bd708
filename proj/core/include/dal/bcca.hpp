#pragma once

#include "dal/matrix.hpp"
#include "dal/rng.hpp"

namespace dal {

// Canonical Mapping Module: one linear projection per feature component,
// producing scalar canonical variables. This is the "max" player of the
// adversarial game.
struct CmmParams {
  Matrix w_id;   // d_feat x 1
  Matrix w_age;  // d_feat x 1

  static CmmParams init(std::size_t d_feat, Rng& rng);
};

// Per-batch canonical statistics from one CMM forward pass.
struct BccaBatch {
  Matrix v_id;     // m x 1
  Matrix v_age;    // m x 1
  double mu_id = 0.0;
  double mu_age = 0.0;
  double var_id = 0.0;   // population variance (divide by m)
  double var_age = 0.0;
  double rho = 0.0;
  double epsilon = 0.0;
  std::size_t m = 0;
};

// v_t = x_t w_t per sample; rho = cov / (sqrt(var_id + eps) * sqrt(var_age + eps)).
// Batch size must be >= 2.
BccaBatch cmm_forward(const CmmParams& cmm, const Matrix& x_id, const Matrix& x_age,
                      double epsilon);

// Analytic d(rho)/d(v_id), d(rho)/d(v_age), both m x 1.
struct BccaGrads {
  Matrix grad_v_id;
  Matrix grad_v_age;
};
BccaGrads bcca_backward(const BccaBatch& batch);

// Chain scalar-variable gradients back to projections and features:
// grad_x_t^i = w_t * g_v_t^i, grad_w_t = sum_i x_t^i * g_v_t^i.
struct CmmGrads {
  Matrix grad_w_id;
  Matrix grad_w_age;
  Matrix grad_x_id;
  Matrix grad_x_age;
};
CmmGrads cmm_backward(const CmmParams& cmm, const Matrix& x_id, const Matrix& x_age,
                      const Matrix& grad_v_id, const Matrix& grad_v_age);

// |rho| and the subgradient factor for chaining through the absolute value.
// sign(0) is defined as 0, which kills the update at the kink.
struct DalObjective {
  double value;
  double sign_factor;
};
DalObjective dal_objective(double rho);

}  // namespace dal
