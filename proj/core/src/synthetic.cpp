#include "dal/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace dal {

int age_group_of(double age_years) {
  if (age_years < 0.0) throw std::invalid_argument("age_group_of: negative age");
  static const double edges[] = {13.0, 19.0, 26.0, 36.0, 46.0, 56.0, 66.0};
  int g = 0;
  for (double e : edges) {
    if (age_years < e) return g;
    ++g;
  }
  return g;  // >= 66
}

void GenSpec::validate() const {
  if (n_id < 2) throw std::invalid_argument("GenSpec: n_id must be >= 2");
  if (samples_per_id < 2) throw std::invalid_argument("GenSpec: samples_per_id must be >= 2");
  if (d_latent_id == 0) throw std::invalid_argument("GenSpec: d_latent_id must be > 0");
  if (d_in < d_latent_id + 1)
    throw std::invalid_argument("GenSpec: d_in must be >= d_latent_id + 1");
  if (!(age_min >= 0.0)) throw std::invalid_argument("GenSpec: age_min must be >= 0");
  if (!(age_max > age_min)) throw std::invalid_argument("GenSpec: age_max must exceed age_min");
  if (noise_stddev < 0.0) throw std::invalid_argument("GenSpec: negative noise_stddev");
}

std::vector<double> age_embedding(double age_years, double age_min, double age_max) {
  const double t = 2.0 * (age_years - age_min) / (age_max - age_min) - 1.0;
  return {t, t * t, t * t * t};
}

namespace {

struct MixingMaps {
  Matrix w1, b1;  // raw -> hidden
  Matrix w2, b2;  // hidden -> d_in
};

MixingMaps make_mixing(const GenSpec& spec) {
  const std::size_t d_raw = spec.d_latent_id + 3;
  const std::size_t d_hidden = spec.d_in;
  Rng mix_rng(spec.mixing_seed);
  MixingMaps m;
  // Identity rows carry O(1) total variance into each hidden unit; the
  // three age rows are amplified so age contributes a comparable share,
  // and the overall pre-activation scale pushes tanh into saturation —
  // otherwise the mixing is near-linear, age is a separable additive
  // nuisance, and disentanglement has nothing to do.
  m.w1 = mix_rng.normal_matrix(d_raw, d_hidden, 0.0, 1.5 / std::sqrt((double)d_raw));
  for (std::size_t i = spec.d_latent_id; i < d_raw; ++i)
    for (std::size_t j = 0; j < d_hidden; ++j)
      m.w1(i, j) *= std::sqrt((double)d_raw) / 2.0;
  // Channel structure: the first half of the hidden units stay fully
  // mixed (the saturation above makes them carry identity-age interaction
  // terms), the next quarter are age-dominated (identity rows attenuated)
  // and the last quarter identity-dominated (age rows attenuated, but only
  // partially, so cross-age matching stays hard). Both factors are
  // therefore recoverable through weakly-contaminated channels — a
  // disentangled, discriminative solution exists — while the mixed units
  // keep the factors entangled for any model that does not actively
  // separate them.
  const std::size_t age_begin = d_hidden / 2;
  const std::size_t id_begin = (3 * d_hidden) / 4;
  for (std::size_t j = age_begin; j < id_begin; ++j)
    for (std::size_t i = 0; i < spec.d_latent_id; ++i) m.w1(i, j) *= 0.15;
  for (std::size_t j = id_begin; j < d_hidden; ++j)
    for (std::size_t i = spec.d_latent_id; i < d_raw; ++i) m.w1(i, j) *= 0.5;
  m.b1 = mix_rng.normal_matrix(1, d_hidden, 0.0, 0.1);
  m.w2 = mix_rng.normal_matrix(d_hidden, spec.d_in, 0.0, 1.0 / std::sqrt((double)d_hidden));
  m.b2 = mix_rng.normal_matrix(1, spec.d_in, 0.0, 0.1);
  return m;
}

Matrix mix(const MixingMaps& maps, const Matrix& raw) {
  Matrix h = matmul(raw, maps.w1);
  for (std::size_t j = 0; j < h.cols(); ++j) h(0, j) = std::tanh(h(0, j) + maps.b1(0, j));
  Matrix out = matmul(h, maps.w2);
  for (std::size_t j = 0; j < out.cols(); ++j) out(0, j) += maps.b2(0, j);
  return out;
}

}  // namespace

Dataset generate(const GenSpec& spec, Rng& rng) {
  spec.validate();
  const MixingMaps maps = make_mixing(spec);

  Dataset ds;
  ds.spec = spec;
  ds.id_latents = Matrix(spec.n_id, spec.d_latent_id);
  ds.samples.reserve(spec.n_id * spec.samples_per_id);

  for (std::size_t id = 0; id < spec.n_id; ++id) {
    // Split streams per identity: generation order never depends on
    // scheduling and any identity is reproducible in isolation.
    Rng id_rng = rng.split(id);
    for (std::size_t j = 0; j < spec.d_latent_id; ++j)
      ds.id_latents(id, j) = id_rng.normal(0.0, 1.0);

    for (std::size_t s = 0; s < spec.samples_per_id; ++s) {
      Sample sample;
      sample.identity_label = id;
      sample.age_years = id_rng.uniform(spec.age_min, spec.age_max);
      sample.age_group = age_group_of(sample.age_years);

      Matrix raw(1, spec.d_latent_id + 3);
      for (std::size_t j = 0; j < spec.d_latent_id; ++j) raw(0, j) = ds.id_latents(id, j);
      const auto phi = age_embedding(sample.age_years, spec.age_min, spec.age_max);
      for (std::size_t j = 0; j < phi.size(); ++j) raw(0, spec.d_latent_id + j) = phi[j];

      sample.input = mix(maps, raw);
      if (spec.noise_stddev > 0.0) {
        for (std::size_t j = 0; j < sample.input.cols(); ++j)
          sample.input(0, j) += id_rng.normal(0.0, spec.noise_stddev);
      }
      ds.samples.push_back(std::move(sample));
    }
  }
  return ds;
}

SplitResult split_cross_age(const std::vector<Sample>& samples, Rng& rng,
                            double test_fraction) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("split_cross_age: test_fraction must be in (0,1)");

  std::map<std::size_t, std::vector<std::size_t>> by_id;
  for (std::size_t i = 0; i < samples.size(); ++i)
    by_id[samples[i].identity_label].push_back(i);

  std::vector<std::size_t> ids;
  for (const auto& [id, idx] : by_id) {
    if (idx.size() < 2)
      throw std::invalid_argument("split_cross_age: identity " + std::to_string(id) +
                                  " has fewer than 2 samples");
    ids.push_back(id);
  }
  if (ids.size() < 2) throw std::invalid_argument("split_cross_age: need >= 2 identities");

  std::size_t n_test = static_cast<std::size_t>(std::llround(test_fraction * ids.size()));
  n_test = std::max<std::size_t>(1, std::min(n_test, ids.size() - 1));

  std::vector<std::size_t> order = ids;
  rng.shuffle(order);
  std::vector<std::size_t> test_ids(order.begin(), order.begin() + n_test);
  std::sort(test_ids.begin(), test_ids.end());

  SplitResult r;
  for (const auto& [id, idx] : by_id) {
    const bool is_test = std::binary_search(test_ids.begin(), test_ids.end(), id);
    if (!is_test) {
      for (std::size_t i : idx) r.train.push_back(samples[i]);
      continue;
    }
    // Maximum-age-gap pair; ties broken by the first occurrence.
    std::size_t young = idx[0], old = idx[0];
    for (std::size_t i : idx) {
      if (samples[i].age_years < samples[young].age_years) young = i;
      if (samples[i].age_years > samples[old].age_years) old = i;
    }
    r.probe.push_back(samples[young]);
    r.gallery.push_back(samples[old]);
  }
  return r;
}

void dump_dataset(const Dataset& ds, std::ostream& out) {
  out << ds.spec.d_in << ' ' << ds.spec.n_id << '\n';
  for (const auto& s : ds.samples) {
    out << s.identity_label << ' ' << format_double(s.age_years) << ' ' << s.age_group;
    for (std::size_t j = 0; j < s.input.cols(); ++j)
      out << ' ' << format_double(s.input(0, j));
    out << '\n';
  }
}

Dataset load_dataset(std::istream& in) {
  Dataset ds;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_dataset: empty stream");
  {
    std::istringstream hs(line);
    if (!(hs >> ds.spec.d_in >> ds.spec.n_id))
      throw std::runtime_error("load_dataset: malformed header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    Sample s;
    if (!(ls >> s.identity_label >> s.age_years >> s.age_group))
      throw std::runtime_error("load_dataset: malformed sample line");
    s.input = Matrix(1, ds.spec.d_in);
    for (std::size_t j = 0; j < ds.spec.d_in; ++j) {
      if (!(ls >> s.input(0, j)))
        throw std::runtime_error("load_dataset: truncated feature vector");
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace dal
