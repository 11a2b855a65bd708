#include "dal/bcca.hpp"

#include <cmath>
#include <stdexcept>

namespace dal {

CmmParams CmmParams::init(std::size_t d_feat, Rng& rng) {
  CmmParams cmm;
  const double stddev = 1.0 / std::sqrt(static_cast<double>(d_feat));
  // Degenerate all-zero projections make rho meaningless; re-sample.
  do {
    cmm.w_id = rng.normal_matrix(d_feat, 1, 0.0, stddev);
  } while (frobenius_norm(cmm.w_id) < 1e-8);
  do {
    cmm.w_age = rng.normal_matrix(d_feat, 1, 0.0, stddev);
  } while (frobenius_norm(cmm.w_age) < 1e-8);
  return cmm;
}

BccaBatch cmm_forward(const CmmParams& cmm, const Matrix& x_id, const Matrix& x_age,
                      double epsilon) {
  if (x_id.rows() != x_age.rows())
    throw std::invalid_argument("cmm_forward: batch size mismatch");
  if (x_id.rows() < 2)
    throw std::invalid_argument("cmm_forward: batch size must be >= 2");
  if (x_id.cols() != cmm.w_id.rows() || x_age.cols() != cmm.w_age.rows())
    throw std::invalid_argument("cmm_forward: feature dim mismatch with CMM");

  BccaBatch b;
  b.epsilon = epsilon;
  b.m = x_id.rows();
  b.v_id = matmul(x_id, cmm.w_id);
  b.v_age = matmul(x_age, cmm.w_age);

  const double inv_m = 1.0 / static_cast<double>(b.m);
  for (std::size_t i = 0; i < b.m; ++i) {
    b.mu_id += b.v_id(i, 0);
    b.mu_age += b.v_age(i, 0);
  }
  b.mu_id *= inv_m;
  b.mu_age *= inv_m;

  double cov = 0.0;
  for (std::size_t i = 0; i < b.m; ++i) {
    const double di = b.v_id(i, 0) - b.mu_id;
    const double da = b.v_age(i, 0) - b.mu_age;
    b.var_id += di * di;
    b.var_age += da * da;
    cov += di * da;
  }
  b.var_id *= inv_m;
  b.var_age *= inv_m;
  cov *= inv_m;

  b.rho = cov / (std::sqrt(b.var_id + epsilon) * std::sqrt(b.var_age + epsilon));
  return b;
}

BccaGrads bcca_backward(const BccaBatch& b) {
  BccaGrads g;
  g.grad_v_id = Matrix(b.m, 1);
  g.grad_v_age = Matrix(b.m, 1);
  const double inv_m = 1.0 / static_cast<double>(b.m);
  const double denom = std::sqrt(b.var_id + b.epsilon) * std::sqrt(b.var_age + b.epsilon);
  for (std::size_t i = 0; i < b.m; ++i) {
    const double di = b.v_id(i, 0) - b.mu_id;
    const double da = b.v_age(i, 0) - b.mu_age;
    g.grad_v_id(i, 0) = inv_m * (da / denom - di * b.rho / (b.var_id + b.epsilon));
    g.grad_v_age(i, 0) = inv_m * (di / denom - da * b.rho / (b.var_age + b.epsilon));
  }
  return g;
}

CmmGrads cmm_backward(const CmmParams& cmm, const Matrix& x_id, const Matrix& x_age,
                      const Matrix& grad_v_id, const Matrix& grad_v_age) {
  if (grad_v_id.rows() != x_id.rows() || grad_v_age.rows() != x_age.rows() ||
      grad_v_id.cols() != 1 || grad_v_age.cols() != 1)
    throw std::invalid_argument("cmm_backward: gradient shape mismatch");
  if (x_id.cols() != cmm.w_id.rows() || x_age.cols() != cmm.w_age.rows())
    throw std::invalid_argument("cmm_backward: feature dim mismatch with CMM");

  CmmGrads g;
  g.grad_w_id = matmul(transpose(x_id), grad_v_id);
  g.grad_w_age = matmul(transpose(x_age), grad_v_age);
  g.grad_x_id = matmul(grad_v_id, transpose(cmm.w_id));
  g.grad_x_age = matmul(grad_v_age, transpose(cmm.w_age));
  return g;
}

DalObjective dal_objective(double rho) {
  double sign = 0.0;
  if (rho > 0.0) sign = 1.0;
  else if (rho < 0.0) sign = -1.0;
  return {std::fabs(rho), sign};
}

}  // namespace dal
