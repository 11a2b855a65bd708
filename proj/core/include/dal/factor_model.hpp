#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "dal/matrix.hpp"
#include "dal/mlp.hpp"
#include "dal/rng.hpp"

namespace dal {

inline constexpr std::size_t kNumAgeGroups = 8;

// Per-batch factorized features. `x` is stored as the recombined sum
// x_id + x_age so the additive decomposition holds bit-for-bit; this can
// differ from the raw backbone output by at most one rounding.
struct FeatureTriple {
  Matrix x;
  Matrix x_id;
  Matrix x_age;

  bool reconstruction_exact() const;
};

// Forward-pass caches needed to reproduce the exact backward pass.
struct TapeRecord {
  MlpTape backbone;
  MlpTape rfm;
  std::size_t batch = 0;
};

struct FactorModelConfig {
  std::size_t d_in = 64;
  std::size_t d_feat = 32;
  std::vector<std::size_t> backbone_hidden = {128, 128};
  std::vector<std::size_t> age_head_hidden = {64, 64};
  // RFM output stays affine so x_age can be negative; the ReLU variant
  // forces x_age >= 0 elementwise and exists for comparison.
  bool rfm_output_relu = false;
};

// Backbone F, residual factorization module R, age head, and the identity
// classifier weights. These are exactly the parameters of the "min" player.
struct FactorModel {
  FactorModelConfig cfg;
  MlpParams backbone;  // d_in -> hidden... -> d_feat
  MlpParams rfm;       // d_feat -> d_feat -> d_feat
  MlpParams age_head;  // d_feat -> hidden... -> 8
  Matrix id_weights;   // d_feat x n_id

  static FactorModel init(const FactorModelConfig& cfg, std::size_t n_id, Rng& rng);

  // Named views over every trainable matrix, checkpoint order.
  std::vector<std::pair<std::string, Matrix*>> param_groups();
  std::vector<std::pair<std::string, const Matrix*>> param_groups() const;
};

struct FactorGrads {
  MlpGrads backbone;
  MlpGrads rfm;
};

// x = F(inputs); x_age = R(x); x_id = x - x_age.
FeatureTriple factor_forward(const FactorModel& model, const Matrix& inputs,
                             TapeRecord* tape = nullptr);

// Gradients of any scalar loss whose feature-space gradients are
// (grad_x_id, grad_x_age). Chain rule through the residual split:
// the gradient reaching the backbone output is
// grad_x_id + J_R^T (grad_x_age - grad_x_id).
FactorGrads factor_backward(const FactorModel& model, const TapeRecord& tape,
                            const Matrix& grad_x_id, const Matrix& grad_x_age);

Matrix age_head_forward(const MlpParams& head, const Matrix& x_age, MlpTape* tape = nullptr);

}  // namespace dal
