#pragma once

#include <string>
#include <vector>

#include "dal/bcca.hpp"
#include "dal/factor_model.hpp"
#include "dal/trainer.hpp"

namespace dal {

struct GradCheckRow {
  std::string component;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// Finite-difference verification of every analytic gradient on small
// random instances. `corrupt_bcca_sign` flips the analytic BCCA gradient
// before comparing; it exists so tests can confirm the check actually
// detects a wrong formula.
std::vector<GradCheckRow> run_gradcheck(std::uint64_t seed, bool corrupt_bcca_sign = false);

bool gradcheck_all_pass(const std::vector<GradCheckRow>& rows);

// Forward-only total multi-task loss, and its analytic gradients for all
// trainable parameter groups including the CMM.
double total_loss(const FactorModel& model, const CmmParams& cmm, const Matrix& inputs,
                  const std::vector<std::size_t>& id_labels,
                  const std::vector<std::size_t>& age_labels, const TrainConfig& config);

struct NamedGrads {
  std::vector<std::pair<std::string, Matrix>> grads;
  const Matrix* find(const std::string& name) const;
};
NamedGrads total_loss_grads(const FactorModel& model, const CmmParams& cmm,
                            const Matrix& inputs, const std::vector<std::size_t>& id_labels,
                            const std::vector<std::size_t>& age_labels,
                            const TrainConfig& config);

}  // namespace dal
