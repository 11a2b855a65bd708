#include "dal/grad_check.hpp"

#include <cmath>
#include <stdexcept>

namespace dal {

Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f, const Matrix& at,
                        double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: h must be > 0");
  Matrix grad(at.rows(), at.cols());
  Matrix x = at;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double orig = x.at_flat(k);
    x.at_flat(k) = orig + h;
    const double fp = f(x);
    x.at_flat(k) = orig - h;
    const double fm = f(x);
    x.at_flat(k) = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw std::runtime_error("finite_diff_grad: non-finite f at entry " + std::to_string(k));
    }
    grad.at_flat(k) = (fp - fm) / (2.0 * h);
  }
  return grad;
}

double grad_rel_error(const Matrix& analytic, const Matrix& numeric) {
  if (!analytic.same_shape(numeric))
    throw std::invalid_argument("grad_rel_error: shape mismatch");
  const double na = frobenius_norm(analytic);
  const double nb = frobenius_norm(numeric);
  if (na == 0.0 && nb == 0.0) return 0.0;
  Matrix diff = analytic;
  diff -= numeric;
  return frobenius_norm(diff) / (na + nb + 1e-300);
}

}  // namespace dal
