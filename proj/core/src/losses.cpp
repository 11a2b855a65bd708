#include "dal/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace dal {
namespace {

constexpr double kNormGuard = 1e-12;

}  // namespace

double cosface_forward(const Matrix& x_id, const Matrix& id_weights,
                       const std::vector<std::size_t>& labels, const CosFaceConfig& cfg,
                       CosFaceCache* cache) {
  const std::size_t n = x_id.rows();
  const std::size_t d = x_id.cols();
  const std::size_t classes = id_weights.cols();
  if (id_weights.rows() != d)
    throw std::invalid_argument("cosface_forward: feature dim mismatch");
  if (labels.size() != n)
    throw std::invalid_argument("cosface_forward: label count mismatch");
  if (!(cfg.margin_m >= 0.0 && cfg.margin_m < 1.0) || !(cfg.scale_s > 0.0))
    throw std::invalid_argument("cosface_forward: invalid margin/scale");
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] >= classes)
      throw std::invalid_argument("cosface_forward: label out of range at sample " +
                                  std::to_string(i));

  Matrix x_hat = x_id;
  std::vector<double> x_norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += x_id(i, j) * x_id(i, j);
    const double norm = std::sqrt(s);
    if (norm == 0.0)
      throw std::runtime_error("cosface_forward: zero-norm identity feature at sample " +
                               std::to_string(i));
    x_norms[i] = norm + kNormGuard;
    for (std::size_t j = 0; j < d; ++j) x_hat(i, j) /= x_norms[i];
  }

  Matrix w_hat = id_weights;
  std::vector<double> w_norms(classes);
  for (std::size_t j = 0; j < classes; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += id_weights(k, j) * id_weights(k, j);
    w_norms[j] = std::sqrt(s) + kNormGuard;
    for (std::size_t k = 0; k < d; ++k) w_hat(k, j) /= w_norms[j];
  }

  Matrix cosines = matmul(x_hat, w_hat);

  // Log-sum-exp with max subtraction; s=64 overflows naive exponentials.
  Matrix probs(n, classes);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double zmax = -1e300;
    for (std::size_t j = 0; j < classes; ++j) {
      double z = cfg.scale_s * (cosines(i, j) - (j == labels[i] ? cfg.margin_m : 0.0));
      probs(i, j) = z;
      if (z > zmax) zmax = z;
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < classes; ++j) {
      probs(i, j) = std::exp(probs(i, j) - zmax);
      sum += probs(i, j);
    }
    const double z_y = cfg.scale_s * (cosines(i, labels[i]) - cfg.margin_m);
    loss += -(z_y - zmax) + std::log(sum);
    for (std::size_t j = 0; j < classes; ++j) probs(i, j) /= sum;
  }
  loss /= static_cast<double>(n);

  if (cache) {
    cache->x_hat = std::move(x_hat);
    cache->w_hat = std::move(w_hat);
    cache->cosines = std::move(cosines);
    cache->probs = std::move(probs);
    cache->x_norms = std::move(x_norms);
    cache->w_norms = std::move(w_norms);
    cache->labels = labels;
    cache->cfg = cfg;
  }
  return loss;
}

CosFaceGrads cosface_backward(const Matrix& x_id, const Matrix& id_weights,
                              const CosFaceCache& cache) {
  const std::size_t n = x_id.rows();
  const std::size_t d = x_id.cols();
  const std::size_t classes = id_weights.cols();
  if (cache.probs.rows() != n || cache.probs.cols() != classes)
    throw std::invalid_argument("cosface_backward: cache does not match batch");

  // dL/dcos_ij = s * (p_ij - [j==y_i]) / n
  Matrix g_cos = cache.probs;
  const double scale = cache.cfg.scale_s / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    g_cos(i, cache.labels[i]) -= 1.0;
    for (std::size_t j = 0; j < classes; ++j) g_cos(i, j) *= scale;
  }

  CosFaceGrads g;
  // dcos_ij/dx_i = (w_hat_j - cos_ij * x_hat_i) / ||x_i||
  g.grad_x_id = matmul(g_cos, transpose(cache.w_hat));
  for (std::size_t i = 0; i < n; ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < classes; ++j) r += g_cos(i, j) * cache.cosines(i, j);
    for (std::size_t k = 0; k < d; ++k) {
      g.grad_x_id(i, k) = (g.grad_x_id(i, k) - r * cache.x_hat(i, k)) / cache.x_norms[i];
    }
  }

  // dcos_ij/dW_j = (x_hat_i - cos_ij * w_hat_j) / ||W_j||
  g.grad_weights = matmul(transpose(cache.x_hat), g_cos);
  for (std::size_t j = 0; j < classes; ++j) {
    double r = 0.0;
    for (std::size_t i = 0; i < n; ++i) r += g_cos(i, j) * cache.cosines(i, j);
    for (std::size_t k = 0; k < d; ++k) {
      g.grad_weights(k, j) = (g.grad_weights(k, j) - r * cache.w_hat(k, j)) / cache.w_norms[j];
    }
  }
  return g;
}

SoftmaxCeResult softmax_ce(const Matrix& logits, const std::vector<std::size_t>& labels) {
  const std::size_t n = logits.rows();
  const std::size_t classes = logits.cols();
  if (labels.size() != n) throw std::invalid_argument("softmax_ce: label count mismatch");
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] >= classes)
      throw std::invalid_argument("softmax_ce: label out of range at sample " +
                                  std::to_string(i));

  SoftmaxCeResult r;
  r.grad_logits = Matrix(n, classes);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double zmax = -1e300;
    for (std::size_t j = 0; j < classes; ++j) zmax = std::max(zmax, logits(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < classes; ++j) {
      r.grad_logits(i, j) = std::exp(logits(i, j) - zmax);
      sum += r.grad_logits(i, j);
    }
    loss += -(logits(i, labels[i]) - zmax) + std::log(sum);
    for (std::size_t j = 0; j < classes; ++j) r.grad_logits(i, j) /= sum;
    r.grad_logits(i, labels[i]) -= 1.0;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  r.grad_logits *= inv_n;
  r.loss = loss * inv_n;
  return r;
}

LossBreakdown combine(double l_id, double l_age, double rho_abs, double lambda1,
                      double lambda2) {
  if (lambda1 < 0.0 || lambda2 < 0.0)
    throw std::invalid_argument("combine: negative loss weights");
  LossBreakdown b;
  b.l_id = l_id;
  b.l_age = l_age;
  b.rho_abs = rho_abs;
  b.total = l_id + lambda1 * l_age + lambda2 * rho_abs;
  return b;
}

}  // namespace dal
