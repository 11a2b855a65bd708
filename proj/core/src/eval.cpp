#include "dal/eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>

#include "dal/bcca.hpp"

namespace dal {
namespace {

Matrix stack_inputs(const std::vector<Sample>& samples) {
  if (samples.empty()) throw std::invalid_argument("eval: empty sample set");
  const std::size_t d = samples[0].input.cols();
  Matrix m(samples.size(), d);
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = samples[i].input(0, j);
  return m;
}

double cosine(const Matrix& a, std::size_t i, const Matrix& b, std::size_t j) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.cols(); ++k) {
    dot += a(i, k) * b(j, k);
    na += a(i, k) * a(i, k);
    nb += b(j, k) * b(j, k);
  }
  const double denom = std::sqrt(na) * std::sqrt(nb);
  if (denom == 0.0) return 0.0;
  return dot / denom;
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

}  // namespace

Matrix extract_id_features(const FactorModel& model, const std::vector<Sample>& samples) {
  return factor_forward(model, stack_inputs(samples)).x_id;
}

Matrix extract_age_features(const FactorModel& model, const std::vector<Sample>& samples) {
  return factor_forward(model, stack_inputs(samples)).x_age;
}

double rank1_identify(const FactorModel& model, const std::vector<Sample>& probe,
                      const std::vector<Sample>& gallery) {
  if (probe.empty() || gallery.empty())
    throw std::invalid_argument("rank1_identify: empty probe or gallery");
  if (probe.size() != gallery.size())
    throw std::invalid_argument("rank1_identify: probe/gallery size mismatch");

  Matrix fp = extract_id_features(model, probe);
  Matrix fg = extract_id_features(model, gallery);

  std::size_t correct = 0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    std::size_t best = 0;
    double best_score = -2.0;
    for (std::size_t j = 0; j < gallery.size(); ++j) {
      const double s = cosine(fp, i, fg, j);
      if (s > best_score) {
        best_score = s;
        best = j;
      }
    }
    if (gallery[best].identity_label == probe[i].identity_label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(probe.size());
}

std::pair<double, double> best_threshold_accuracy(std::vector<ScoredPair> pairs) {
  if (pairs.size() < 2)
    throw std::invalid_argument("best_threshold_accuracy: need >= 2 pairs");
  std::sort(pairs.begin(), pairs.end(),
            [](const ScoredPair& a, const ScoredPair& b) { return a.score < b.score; });

  std::vector<double> thresholds;
  thresholds.push_back(pairs.front().score - 1.0);
  for (std::size_t i = 0; i + 1 < pairs.size(); ++i)
    thresholds.push_back(0.5 * (pairs[i].score + pairs[i + 1].score));
  thresholds.push_back(pairs.back().score + 1.0);

  double best_acc = -1.0, best_thr = 0.0;
  for (double thr : thresholds) {
    std::size_t correct = 0;
    for (const auto& p : pairs)
      if ((p.score > thr) == p.same) ++correct;
    const double acc = static_cast<double>(correct) / static_cast<double>(pairs.size());
    if (acc > best_acc) {
      best_acc = acc;
      best_thr = thr;
    }
  }
  return {best_thr, best_acc};
}

std::pair<double, double> verification_accuracy(const FactorModel& model,
                                                const std::vector<Sample>& probe,
                                                const std::vector<Sample>& gallery) {
  Matrix fp = extract_id_features(model, probe);
  Matrix fg = extract_id_features(model, gallery);
  std::vector<ScoredPair> pairs;
  for (std::size_t i = 0; i < probe.size(); ++i)
    for (std::size_t j = 0; j < gallery.size(); ++j)
      pairs.push_back({cosine(fp, i, fg, j),
                       probe[i].identity_label == gallery[j].identity_label});
  return best_threshold_accuracy(std::move(pairs));
}

ResidualCorrelation residual_correlation_features(const Matrix& feats_id,
                                                  const Matrix& feats_age, double ridge) {
  if (feats_id.rows() != feats_age.rows())
    throw std::invalid_argument("residual_correlation: row mismatch");
  const std::size_t n = feats_id.rows();
  if (n < 2) throw std::invalid_argument("residual_correlation: need >= 2 samples");

  Eigen::MatrixXd X = to_eigen(feats_id);
  Eigen::MatrixXd Y = to_eigen(feats_age);
  X.rowwise() -= X.colwise().mean();
  Y.rowwise() -= Y.colwise().mean();

  const double inv_n = 1.0 / static_cast<double>(n);
  ResidualCorrelation r;
  if ((X.array().square().sum() * inv_n) < 1e-12 ||
      (Y.array().square().sum() * inv_n) < 1e-12) {
    r.zero_variance = true;
    r.value = 0.0;
    return r;
  }

  Eigen::MatrixXd sxx = X.transpose() * X * inv_n;
  Eigen::MatrixXd syy = Y.transpose() * Y * inv_n;
  sxx.diagonal().array() += ridge;
  syy.diagonal().array() += ridge;
  const Eigen::MatrixXd sxy = X.transpose() * Y * inv_n;

  auto inv_sqrt = [](const Eigen::MatrixXd& s) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw std::runtime_error("residual_correlation: covariance rank-deficient beyond ridge");
    return Eigen::MatrixXd(es.eigenvectors() *
                           es.eigenvalues().array().rsqrt().matrix().asDiagonal() *
                           es.eigenvectors().transpose());
  };

  const Eigen::MatrixXd t = inv_sqrt(sxx) * sxy * inv_sqrt(syy);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(t);
  r.value = svd.singularValues()(0);
  return r;
}

ResidualCorrelation residual_correlation(const FactorModel& model,
                                         const std::vector<Sample>& samples, double ridge) {
  FeatureTriple t = factor_forward(model, stack_inputs(samples));
  return residual_correlation_features(t.x_id, t.x_age, ridge);
}

double sgd_max_correlation(const Matrix& feats_id, const Matrix& feats_age, double epsilon,
                           std::size_t steps, double lr, std::uint64_t seed) {
  Rng rng(seed);
  CmmParams cmm = CmmParams::init(feats_id.cols(), rng);
  double best = 0.0;
  for (std::size_t s = 0; s < steps; ++s) {
    BccaBatch b = cmm_forward(cmm, feats_id, feats_age, epsilon);
    const DalObjective obj = dal_objective(b.rho);
    best = std::max(best, obj.value);
    BccaGrads gv = bcca_backward(b);
    gv.grad_v_id *= obj.sign_factor;
    gv.grad_v_age *= obj.sign_factor;
    CmmGrads gc = cmm_backward(cmm, feats_id, feats_age, gv.grad_v_id, gv.grad_v_age);
    gc.grad_w_id *= lr;
    gc.grad_w_age *= lr;
    cmm.w_id += gc.grad_w_id;
    cmm.w_age += gc.grad_w_age;
    const double ni = frobenius_norm(cmm.w_id);
    const double na = frobenius_norm(cmm.w_age);
    if (ni > 0.0) cmm.w_id *= 1.0 / ni;
    if (na > 0.0) cmm.w_age *= 1.0 / na;
  }
  BccaBatch b = cmm_forward(cmm, feats_id, feats_age, epsilon);
  return std::max(best, std::fabs(b.rho));
}

std::pair<std::array<GroupCosStats, kNumAgeGroups>, std::size_t> cosine_center_histograms(
    const FactorModel& model, const std::vector<Sample>& samples) {
  Matrix feats = extract_id_features(model, samples);

  std::map<std::size_t, std::vector<std::size_t>> by_id;
  for (std::size_t i = 0; i < samples.size(); ++i)
    by_id[samples[i].identity_label].push_back(i);

  std::array<GroupCosStats, kNumAgeGroups> stats{};
  std::array<std::vector<double>, kNumAgeGroups> values;
  std::size_t excluded = 0;

  for (const auto& [id, idx] : by_id) {
    if (idx.size() < 2) {
      ++excluded;
      continue;
    }
    Matrix center(1, feats.cols());
    for (std::size_t i : idx)
      for (std::size_t j = 0; j < feats.cols(); ++j) center(0, j) += feats(i, j);
    center *= 1.0 / static_cast<double>(idx.size());
    if (frobenius_norm(center) < 1e-12) {
      ++excluded;
      continue;
    }
    for (std::size_t i : idx) {
      const double c = cosine(feats, i, center, 0);
      values[samples[i].age_group].push_back(c);
    }
  }

  for (std::size_t g = 0; g < kNumAgeGroups; ++g) {
    auto& vs = values[g];
    stats[g].count = vs.size();
    if (vs.empty()) continue;
    double sum = 0.0;
    for (double v : vs) sum += v;
    stats[g].mean = sum / static_cast<double>(vs.size());
    double sq = 0.0;
    for (double v : vs) sq += (v - stats[g].mean) * (v - stats[g].mean);
    stats[g].stddev = std::sqrt(sq / static_cast<double>(vs.size()));
    for (double v : vs) {
      int bin = static_cast<int>((v + 1.0) / 2.0 * kHistogramBins);
      bin = std::clamp(bin, 0, static_cast<int>(kHistogramBins) - 1);
      ++stats[g].histogram[bin];
    }
  }
  return {stats, excluded};
}

EvalReport evaluate(const FactorModel& model, const std::vector<Sample>& probe,
                    const std::vector<Sample>& gallery,
                    const std::vector<Sample>& all_samples, double ridge) {
  EvalReport r;
  r.rank1 = rank1_identify(model, probe, gallery);
  auto [thr, acc] = verification_accuracy(model, probe, gallery);
  r.verif_best_threshold = thr;
  r.verif_accuracy = acc;
  r.residual_max_corr = residual_correlation(model, all_samples, ridge).value;
  auto [stats, excluded] = cosine_center_histograms(model, all_samples);
  r.per_group = stats;
  r.excluded_identities = excluded;
  return r;
}

void write_report_text(const EvalReport& r, std::ostream& out) {
  out << "rank1 = " << format_double(r.rank1) << '\n';
  out << "verif_accuracy = " << format_double(r.verif_accuracy) << '\n';
  out << "verif_best_threshold = " << format_double(r.verif_best_threshold) << '\n';
  out << "residual_max_corr = " << format_double(r.residual_max_corr) << '\n';
  out << "excluded_identities = " << r.excluded_identities << '\n';
  for (std::size_t g = 0; g < kNumAgeGroups; ++g) {
    out << "group" << g << ".count = " << r.per_group[g].count << '\n';
    out << "group" << g << ".mean = " << format_double(r.per_group[g].mean) << '\n';
    out << "group" << g << ".stddev = " << format_double(r.per_group[g].stddev) << '\n';
  }
}

void write_report_csv(const EvalReport& r, std::ostream& out) {
  out << "group,count,mean,stddev";
  for (std::size_t b = 0; b < kHistogramBins; ++b) out << ",bin" << b;
  out << '\n';
  for (std::size_t g = 0; g < kNumAgeGroups; ++g) {
    out << g << ',' << r.per_group[g].count << ',' << format_double(r.per_group[g].mean)
        << ',' << format_double(r.per_group[g].stddev);
    for (std::size_t b = 0; b < kHistogramBins; ++b) out << ',' << r.per_group[g].histogram[b];
    out << '\n';
  }
}

}  // namespace dal
