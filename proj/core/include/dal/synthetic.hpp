#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dal/matrix.hpp"
#include "dal/rng.hpp"

namespace dal {

// Fixed 8-bin age partition: 0-12, 13-18, 19-25, 26-35, 36-45, 46-55,
// 56-65, >=66.
int age_group_of(double age_years);

struct Sample {
  Matrix input;  // 1 x d_in
  std::size_t identity_label = 0;
  double age_years = 0.0;
  int age_group = 0;
};

struct GenSpec {
  std::size_t n_id = 200;
  std::size_t samples_per_id = 20;
  std::size_t d_latent_id = 16;
  std::size_t d_in = 64;
  double age_min = 0.0;
  double age_max = 80.0;
  std::uint64_t mixing_seed = 7;
  double noise_stddev = 0.1;

  void validate() const;
};

struct Dataset {
  GenSpec spec;
  std::vector<Sample> samples;
  Matrix id_latents;  // n_id x d_latent_id, ground-truth identity factors
};

// Each sample mixes a per-identity Gaussian latent with a cubic polynomial
// embedding of its age through a fixed two-layer tanh map, plus noise.
// Samples of the same identity share the latent exactly.
Dataset generate(const GenSpec& spec, Rng& rng);

// Cubic basis of age normalized to [-1, 1]: (t, t^2, t^3).
std::vector<double> age_embedding(double age_years, double age_min, double age_max);

struct SplitResult {
  std::vector<Sample> train;
  std::vector<Sample> probe;    // younger of each held-out max-gap pair
  std::vector<Sample> gallery;  // older of each pair, same identity order
};

// Held-out identities contribute their maximum-age-gap pair to probe and
// gallery; all samples of the remaining identities form the train set.
// Train and test identity sets are disjoint.
SplitResult split_cross_age(const std::vector<Sample>& samples, Rng& rng,
                            double test_fraction = 0.2);

// Text dump: header "d_in n_id", then one line per sample:
// identity_label age_years age_group v_1 ... v_{d_in}.
void dump_dataset(const Dataset& ds, std::ostream& out);
Dataset load_dataset(std::istream& in);

}  // namespace dal
