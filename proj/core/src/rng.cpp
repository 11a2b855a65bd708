#include "dal/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace dal {
namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::next_uniform() {
  // (0,1]: never returns 0, safe under log().
  return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  if (hi < lo) throw std::invalid_argument("Rng::uniform: hi < lo");
  return lo + (hi - lo) * next_uniform();
}

double Rng::normal(double mean, double stddev) {
  if (stddev < 0.0) throw std::invalid_argument("Rng::normal: negative stddev");
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return mean + stddev * cached_normal_;
  }
  const double u1 = next_uniform();
  const double u2 = next_uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  cached_normal_ = r * std::sin(theta);
  has_cached_normal_ = true;
  return mean + stddev * r * std::cos(theta);
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::uniform_index: n == 0");
  // Rejection sampling for an unbiased draw.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

Rng Rng::split(std::uint64_t stream_id) const {
  std::uint64_t s = seed_ ^ 0xa5a5a5a55a5a5a5aULL;
  std::uint64_t mix = s;
  splitmix64(mix);
  return Rng(splitmix64(mix) ^ (stream_id * 0x2545f4914f6cdd1dULL + 0x1234567deadbeefULL));
}

Matrix Rng::normal_matrix(std::size_t rows, std::size_t cols, double mean, double stddev) {
  Matrix m(rows, cols);
  for (std::size_t k = 0; k < m.size(); ++k) m.at_flat(k) = normal(mean, stddev);
  return m;
}

Matrix Rng::uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi) {
  Matrix m(rows, cols);
  for (std::size_t k = 0; k < m.size(); ++k) m.at_flat(k) = uniform(lo, hi);
  return m;
}

}  // namespace dal
