#pragma once

#include <vector>

#include "dal/matrix.hpp"

namespace dal {

struct CosFaceConfig {
  double margin_m = 0.35;
  double scale_s = 64.0;
};

struct LossBreakdown {
  double l_id = 0.0;
  double l_age = 0.0;
  double rho_abs = 0.0;
  double total = 0.0;
};

// Cached forward state for the margin-cosine loss backward pass.
struct CosFaceCache {
  Matrix x_hat;      // batch x d, row-normalized features
  Matrix w_hat;      // d x C, column-normalized weights
  Matrix cosines;    // batch x C
  Matrix probs;      // batch x C, softmax of margin-shifted scaled logits
  std::vector<double> x_norms;  // guarded norms
  std::vector<double> w_norms;
  std::vector<std::size_t> labels;
  CosFaceConfig cfg;
};

// Mean over the batch of -log softmax over s*(cos - m*[j==y]) logits.
// Norm guard tau = 1e-12 on both normalizations; an exactly zero-norm
// feature is rejected by name.
double cosface_forward(const Matrix& x_id, const Matrix& id_weights,
                       const std::vector<std::size_t>& labels, const CosFaceConfig& cfg,
                       CosFaceCache* cache = nullptr);

struct CosFaceGrads {
  Matrix grad_x_id;     // batch x d
  Matrix grad_weights;  // d x C
};
CosFaceGrads cosface_backward(const Matrix& x_id, const Matrix& id_weights,
                              const CosFaceCache& cache);

// Mean cross-entropy over softmax(logits); grad = (softmax - onehot)/batch.
struct SoftmaxCeResult {
  double loss;
  Matrix grad_logits;
};
SoftmaxCeResult softmax_ce(const Matrix& logits, const std::vector<std::size_t>& labels);

LossBreakdown combine(double l_id, double l_age, double rho_abs, double lambda1, double lambda2);

}  // namespace dal
