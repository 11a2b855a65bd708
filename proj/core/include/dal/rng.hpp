#pragma once

#include <cstdint>

#include "dal/matrix.hpp"

namespace dal {

// Deterministic splittable generator built on splitmix64. The normal
// variates use Box-Muller on top of the raw stream, so the full sequence
// is reproducible bit-for-bit from the seed alone.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t next_u64();
  // Uniform in (0, 1].
  double next_uniform();
  double uniform(double lo, double hi);
  double normal(double mean, double stddev);
  std::uint64_t uniform_index(std::uint64_t n);

  // Independent child stream; deterministic in (seed, stream_id),
  // independent of how much the parent has been consumed.
  Rng split(std::uint64_t stream_id) const;

  Matrix normal_matrix(std::size_t rows, std::size_t cols, double mean, double stddev);
  Matrix uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::uint64_t i = v.size(); i > 1; --i) {
      std::uint64_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace dal
