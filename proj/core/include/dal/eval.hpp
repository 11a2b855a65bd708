#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include "dal/factor_model.hpp"
#include "dal/synthetic.hpp"

namespace dal {

inline constexpr std::size_t kHistogramBins = 20;  // uniform over [-1, 1]

struct GroupCosStats {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t count = 0;
  std::array<std::size_t, kHistogramBins> histogram{};
};

struct EvalReport {
  double rank1 = 0.0;
  double verif_best_threshold = 0.0;
  double verif_accuracy = 0.0;
  double residual_max_corr = 0.0;
  std::array<GroupCosStats, kNumAgeGroups> per_group;
  std::size_t excluded_identities = 0;  // degenerate centers / singletons
};

// Identity-feature extraction for a list of samples, one row per sample.
Matrix extract_id_features(const FactorModel& model, const std::vector<Sample>& samples);
Matrix extract_age_features(const FactorModel& model, const std::vector<Sample>& samples);

// Each probe matched to the argmax-cosine gallery entry; ties broken by
// the lowest gallery index. Probe and gallery are aligned identity lists.
double rank1_identify(const FactorModel& model, const std::vector<Sample>& probe,
                      const std::vector<Sample>& gallery);

struct ScoredPair {
  double score = 0.0;
  bool same = false;
};

// Exhaustive sweep over all midpoints of sorted scores plus the two
// outer sentinels; returns the accuracy-maximizing threshold.
std::pair<double, double> best_threshold_accuracy(std::vector<ScoredPair> pairs);

// All probe x gallery cosine pairs (diagonal positive), then the sweep.
std::pair<double, double> verification_accuracy(const FactorModel& model,
                                                const std::vector<Sample>& probe,
                                                const std::vector<Sample>& gallery);

struct ResidualCorrelation {
  double value = 0.0;
  bool zero_variance = false;
};

// Closed-form top canonical correlation between x_id and x_age over the
// whole sample set: ridge-regularized whitening of both covariances, then
// the largest singular value of the whitened cross-covariance.
ResidualCorrelation residual_correlation(const FactorModel& model,
                                         const std::vector<Sample>& samples,
                                         double ridge = 1e-5);
ResidualCorrelation residual_correlation_features(const Matrix& feats_id,
                                                  const Matrix& feats_age, double ridge);

// SGD estimate of the same quantity: full-set gradient ascent on |rho|
// with a frozen model, cross-validating the closed-form oracle.
double sgd_max_correlation(const Matrix& feats_id, const Matrix& feats_age, double epsilon,
                           std::size_t steps, double lr, std::uint64_t seed);

// Cosine of each sample's x_id against its per-identity mean, bucketed by
// age group. Identities with one sample or a degenerate center are
// excluded and counted.
std::pair<std::array<GroupCosStats, kNumAgeGroups>, std::size_t> cosine_center_histograms(
    const FactorModel& model, const std::vector<Sample>& samples);

EvalReport evaluate(const FactorModel& model, const std::vector<Sample>& probe,
                    const std::vector<Sample>& gallery,
                    const std::vector<Sample>& all_samples, double ridge = 1e-5);

void write_report_text(const EvalReport& report, std::ostream& out);
void write_report_csv(const EvalReport& report, std::ostream& out);

}  // namespace dal
