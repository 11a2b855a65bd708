#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dal/bcca.hpp"
#include "dal/factor_model.hpp"
#include "dal/losses.hpp"
#include "dal/synthetic.hpp"

namespace dal {

enum class Mode { kBaseline, kPlusAge, kPlusAgeDal };
enum class Phase { kMax, kMin };

std::string mode_name(Mode m);
std::optional<Mode> parse_mode(const std::string& s);

struct TrainConfig {
  double lambda1 = 0.1;
  double lambda2 = 0.1;
  CosFaceConfig cosface;
  double epsilon = 1e-5;
  // Small batches are deliberate: each adversarial cycle spans
  // max_phase_iters + min_phase_iters fresh batches, so the number of
  // decorrelation cycles per epoch scales inversely with batch size, and
  // at desk scale those cycles — not gradient quality — are the limiting
  // resource for disentanglement.
  std::size_t batch_size = 8;
  std::size_t max_phase_iters = 20;
  std::size_t min_phase_iters = 50;
  std::size_t epochs = 30;
  double lr = 0.05;
  std::vector<std::pair<std::size_t, double>> lr_milestones;  // (epoch, factor)
  std::uint64_t seed = 1;
  Mode mode = Mode::kPlusAgeDal;
  bool start_with_max = true;
  FactorModelConfig model;

  // Applies mode gating (baseline: lambda1 = lambda2 = 0; plus_age:
  // lambda2 = 0) and checks ranges.
  void finalize();
  // Default decay: x0.1 at 55% and 82% of epochs.
  static std::vector<std::pair<std::size_t, double>> default_milestones(std::size_t epochs);
};

struct StepLog {
  std::size_t step = 0;
  Phase phase = Phase::kMin;
  double rho_abs = 0.0;
  double l_id = 0.0;
  double l_age = 0.0;
  double total = 0.0;
  double lr = 0.0;
};

struct StepMetrics {
  double rho_before = 0.0;
  double rho_after = 0.0;
  LossBreakdown loss;
};

// Max phase: gradient ascent on |rho| with respect to the CMM projections
// only; F, R and heads are untouched. Projections are renormalized to unit
// norm afterwards (rho is scale-invariant in w, so this only conditions
// the ascent).
StepMetrics train_step_max(const FactorModel& model, CmmParams& cmm, const Matrix& inputs,
                           double epsilon, double lr, std::size_t* bcca_backward_calls = nullptr);

// Min phase: one SGD descent step on the combined loss for F, R, the age
// head and the identity classifier, with the CMM frozen.
StepMetrics train_step_min(FactorModel& model, const CmmParams& cmm, const Matrix& inputs,
                           const std::vector<std::size_t>& id_labels,
                           const std::vector<std::size_t>& age_labels,
                           const TrainConfig& config, double lr,
                           std::size_t* bcca_backward_calls = nullptr);

struct TrainResult {
  FactorModel model;
  CmmParams cmm;
  std::vector<StepLog> log;
  std::size_t bcca_backward_calls = 0;
  std::size_t reconstruction_checks = 0;
};

using StepCallback = std::function<void(const StepLog&)>;

// Full adversarial schedule over shuffled mini-batches. One fresh batch
// per iteration; both phases advance the epoch. Deterministic given
// (config, dataset). Modes without a DAL term run min steps only and
// never evaluate BCCA gradients.
TrainResult fit(const TrainConfig& config, const std::vector<Sample>& train_samples,
                const StepCallback& on_step = nullptr);

std::string csv_header();
std::string csv_row(const StepLog& row);

// Label remapping: identity labels in a training subset are made dense in
// [0, n_train_id) for the classifier. Returns remapped labels plus count.
std::pair<std::vector<std::size_t>, std::size_t> dense_identity_labels(
    const std::vector<Sample>& samples);

}  // namespace dal
