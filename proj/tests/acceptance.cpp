// Acceptance suite: one line per headline guarantee, [PASS]/[FAIL] each,
// nonzero exit if any fail. Comparative experiments share training runs
// across checks to keep the total runtime bounded.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <vector>

#include "dal/bcca.hpp"
#include "dal/eval.hpp"
#include "dal/grad_check.hpp"
#include "dal/gradcheck_suite.hpp"
#include "dal/synthetic.hpp"
#include "dal/trainer.hpp"

using namespace dal;

namespace {

int g_failures = 0;

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point start = clock::now();
  return std::chrono::duration<double>(clock::now() - start).count();
}

void report(int number, bool pass, const std::string& name, const std::string& detail) {
  std::printf("[%s] %d. %s (%s)\n", pass ? "PASS" : "FAIL", number, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Correlation statistic equals an independent textbook Pearson computation.

void criterion_1() {
  const double t0 = now_seconds();
  const double eps = 1e-12;
  const std::size_t d = 32;
  const std::size_t sizes[] = {2, 4, 64, 512};
  Rng rng(101);
  double max_diff = 0.0;
  std::size_t compared = 0;
  for (int batch = 0; batch < 100; ++batch) {
    const std::size_t m = sizes[batch % 4];
    CmmParams cmm = CmmParams::init(d, rng);
    Matrix x_id = rng.normal_matrix(m, d, 0.0, 1.0);
    Matrix x_age = rng.normal_matrix(m, d, 0.0, 1.0);
    // partially correlate the blocks so rho spans a range
    for (std::size_t i = 0; i < m; ++i) x_age(i, 0) += 0.5 * x_id(i, 0);

    const BccaBatch b = cmm_forward(cmm, x_id, x_age, eps);

    // Independent computation: explicit projections and two-pass Pearson.
    std::vector<double> v1(m), v2(m);
    double mu1 = 0.0, mu2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double a = 0.0, c = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        a += x_id(i, k) * cmm.w_id(k, 0);
        c += x_age(i, k) * cmm.w_age(k, 0);
      }
      v1[i] = a;
      v2[i] = c;
      mu1 += a;
      mu2 += c;
    }
    mu1 /= m;
    mu2 /= m;
    double cov = 0.0, var1 = 0.0, var2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      cov += (v1[i] - mu1) * (v2[i] - mu2);
      var1 += (v1[i] - mu1) * (v1[i] - mu1);
      var2 += (v2[i] - mu2) * (v2[i] - mu2);
    }
    cov /= m;
    var1 /= m;
    var2 /= m;
    if (var1 < 100.0 * eps || var2 < 100.0 * eps) continue;
    const double pearson = cov / (std::sqrt(var1) * std::sqrt(var2));
    max_diff = std::max(max_diff, std::fabs(b.rho - pearson));
    ++compared;
  }
  const double elapsed = now_seconds() - t0;
  const bool pass = max_diff <= 1e-6 && compared >= 90 && elapsed < 5.0;
  report(1, pass, "correlation matches independent Pearson over 100 batches",
         "max |diff| " + fmt(max_diff) + ", " + std::to_string(compared) + " compared, " +
             fmt(elapsed) + " s");
}

// ---------------------------------------------------------------------------
// 2. Analytic d(rho)/dv matches central finite differences, including
//    near-|rho|=1 and near-zero-variance batches.

void criterion_2() {
  const double t0 = now_seconds();
  const double eps = 1e-5;
  CmmParams unit;  // identity projections expose v directly
  unit.w_id = Matrix(1, 1, 1.0);
  unit.w_age = Matrix(1, 1, 1.0);

  Rng rng(202);
  std::vector<std::pair<Matrix, Matrix>> batches;
  const std::size_t sizes[] = {4, 8, 16, 64};
  for (int i = 0; i < 20; ++i) {
    const std::size_t m = sizes[i % 4];
    batches.emplace_back(rng.normal_matrix(m, 1, 0.0, 1.0), rng.normal_matrix(m, 1, 0.0, 1.0));
  }
  // near rho = +1 and -1: v_age is an affine image of v_id plus small noise
  for (double slope : {2.0, -2.0}) {
    Matrix v_id = rng.normal_matrix(8, 1, 0.0, 0.1);
    Matrix v_age = v_id;
    v_age *= slope;
    v_age += rng.normal_matrix(8, 1, 0.0, 0.003);
    batches.emplace_back(v_id, v_age);
  }
  // near-zero variance on one side: the epsilon floor dominates
  batches.emplace_back(rng.normal_matrix(8, 1, 0.0, 1.0),
                       rng.normal_matrix(8, 1, 0.5, 1e-6));

  double worst = 0.0;
  for (const auto& [v_id, v_age] : batches) {
    const BccaBatch b = cmm_forward(unit, v_id, v_age, eps);
    const BccaGrads g = bcca_backward(b);
    Matrix fd_id = finite_diff_grad(
        [&](const Matrix& v) { return cmm_forward(unit, v, v_age, eps).rho; }, v_id, 1e-5);
    Matrix fd_age = finite_diff_grad(
        [&](const Matrix& v) { return cmm_forward(unit, v_id, v, eps).rho; }, v_age, 1e-5);
    worst = std::max(worst, grad_rel_error(g.grad_v_id, fd_id));
    worst = std::max(worst, grad_rel_error(g.grad_v_age, fd_age));
  }
  const double elapsed = now_seconds() - t0;
  const bool pass = worst <= 1e-6 && elapsed < 10.0;
  report(2, pass, "analytic correlation gradients match finite differences",
         "worst rel err " + fmt(worst) + " over " + std::to_string(batches.size()) +
             " batches incl. extremes, " + fmt(elapsed) + " s");
}

// ---------------------------------------------------------------------------
// 3. End-to-end gradient check across every trainable parameter group.

void criterion_3() {
  const double t0 = now_seconds();
  bool pass = true;
  double worst = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto rows = run_gradcheck(seed);
    for (const auto& r : rows) {
      worst = std::max(worst, r.max_rel_error / r.tolerance);
      if (!r.pass) pass = false;
    }
  }
  const double elapsed = now_seconds() - t0;
  pass = pass && elapsed < 120.0;
  report(3, pass, "end-to-end gradient check passes on 3 seeds",
         "worst error/tolerance ratio " + fmt(worst) + ", " + fmt(elapsed) + " s");
}

// ---------------------------------------------------------------------------
// 4. Max-phase ascent reaches the closed-form top canonical correlation.

void criterion_4() {
  const double t0 = now_seconds();
  GenSpec spec;
  spec.n_id = 100;
  spec.samples_per_id = 20;  // 2000 samples
  Rng gen_rng(404);
  Dataset ds = generate(spec, gen_rng);

  Matrix inputs(ds.samples.size(), spec.d_in);
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    for (std::size_t j = 0; j < spec.d_in; ++j) inputs(i, j) = ds.samples[i].input(0, j);

  FactorModelConfig mcfg;  // frozen random model at the default architecture
  Rng model_rng(405);
  const FactorModel model = FactorModel::init(mcfg, spec.n_id, model_rng);
  CmmParams cmm = CmmParams::init(mcfg.d_feat, model_rng);

  const double epsilon = 1e-5;
  const FeatureTriple t = factor_forward(model, inputs);
  const double oracle = residual_correlation_features(t.x_id, t.x_age, epsilon).value;

  double reached = 0.0;
  for (int step = 0; step < 500; ++step) {
    StepMetrics m = train_step_max(model, cmm, inputs, epsilon, 0.5);
    reached = std::max(reached, m.rho_after);
  }
  const double elapsed = now_seconds() - t0;
  const double gap = oracle - reached;
  const bool pass = std::fabs(gap) <= 1e-2 && elapsed < 60.0;
  report(4, pass, "500 max-phase steps reach the closed-form correlation optimum",
         "closed form " + fmt(oracle) + ", ascent " + fmt(reached) + ", gap " + fmt(gap) +
             ", " + fmt(elapsed) + " s");
}

// ---------------------------------------------------------------------------
// 5-8. Comparative experiments: the adversarial model against the same
// pipeline without the decorrelation term, 3 seeds, shared runs.

struct SeedOutcome {
  double corr_age = 0.0;
  double corr_dal = 0.0;
  double rank1_age = 0.0;
  double rank1_dal = 0.0;
  int groups_improved = 0;
  int groups_compared = 0;
};

void comparative_criteria() {
  const double t0 = now_seconds();
  std::vector<SeedOutcome> outcomes;
  bool recon_ok = true;
  std::string recon_detail;
  std::size_t total_steps = 0;

  for (std::uint64_t seed : {1, 2, 3}) {
    GenSpec spec;  // defaults: 200 ids x 20 samples, d_in 64
    Rng gen_rng(seed);
    Dataset ds = generate(spec, gen_rng);
    Rng split_rng(seed);
    SplitResult split = split_cross_age(ds.samples, split_rng, 0.2);

    SeedOutcome o;
    std::array<GroupCosStats, kNumAgeGroups> groups_age{}, groups_dal{};
    for (Mode mode : {Mode::kPlusAge, Mode::kPlusAgeDal}) {
      TrainConfig cfg;
      cfg.mode = mode;
      cfg.seed = seed;
      cfg.epochs = 30;
      cfg.model.d_in = spec.d_in;
      TrainResult r;
      try {
        r = fit(cfg, split.train);
      } catch (const std::exception& e) {
        recon_ok = false;
        recon_detail = std::string("training aborted: ") + e.what();
        break;
      }
      if (r.reconstruction_checks != r.log.size()) {
        recon_ok = false;
        recon_detail = "reconstruction check count mismatch";
      }
      total_steps += r.reconstruction_checks;

      const double corr = residual_correlation(r.model, ds.samples).value;
      const double rank1 = rank1_identify(r.model, split.probe, split.gallery);
      // Cosine-to-center compactness is compared on the samples of the
      // held-out identities: on training identities both models memorize
      // their class centers and the group means differ only in the third
      // decimal place, which says nothing about compactness of the learned
      // representation.
      std::set<std::size_t> test_ids;
      for (const auto& s : split.probe) test_ids.insert(s.identity_label);
      std::vector<Sample> held;
      for (const auto& s : ds.samples)
        if (test_ids.count(s.identity_label)) held.push_back(s);
      auto [stats, excluded] = cosine_center_histograms(r.model, held);
      (void)excluded;
      if (mode == Mode::kPlusAge) {
        o.corr_age = corr;
        o.rank1_age = rank1;
        groups_age = stats;
      } else {
        o.corr_dal = corr;
        o.rank1_dal = rank1;
        groups_dal = stats;
      }
    }
    for (std::size_t g = 0; g < kNumAgeGroups; ++g) {
      if (groups_age[g].count == 0 || groups_dal[g].count == 0) continue;
      ++o.groups_compared;
      if (groups_dal[g].mean > groups_age[g].mean) ++o.groups_improved;
    }
    outcomes.push_back(o);
    if (!recon_ok) break;
  }
  const double elapsed = now_seconds() - t0;

  // 5: decorrelation gap
  {
    bool pass = outcomes.size() == 3 && elapsed < 900.0;
    std::string detail;
    for (const auto& o : outcomes) {
      if (!(o.corr_dal < o.corr_age && o.corr_age - o.corr_dal > 0.05)) pass = false;
      if (!detail.empty()) detail += "; ";
      detail += fmt(o.corr_age) + " vs " + fmt(o.corr_dal);
    }
    report(5, pass, "adversarial term lowers residual correlation by > 0.05 on 3 seeds",
           detail + ", " + fmt(elapsed) + " s total");
  }

  // 6: rank-1 non-regression plus majority improvement
  {
    int strictly_better = 0;
    bool pass = outcomes.size() == 3;
    std::string detail;
    for (const auto& o : outcomes) {
      if (o.rank1_dal < o.rank1_age - 0.02) pass = false;
      if (o.rank1_dal > o.rank1_age) ++strictly_better;
      if (!detail.empty()) detail += "; ";
      detail += fmt(o.rank1_age) + " vs " + fmt(o.rank1_dal);
    }
    pass = pass && strictly_better >= 2;
    report(6, pass, "rank-1 does not regress and improves on the seed majority",
           detail + ", strictly better on " + std::to_string(strictly_better) + "/3");
  }

  // 7: per-age-group cosine-to-center improvement
  {
    bool pass = outcomes.size() == 3;
    std::string detail;
    for (const auto& o : outcomes) {
      if (o.groups_improved < 6 || o.groups_compared < 8) pass = false;
      if (!detail.empty()) detail += "; ";
      detail += std::to_string(o.groups_improved) + "/" + std::to_string(o.groups_compared);
    }
    report(7, pass, "cosine-to-center mean higher with the adversarial term in >= 6/8 groups",
           detail);
  }

  // 8: exact additive reconstruction throughout all runs above (the
  // forward pass asserts bitwise x_id + x_age == x every step) plus a
  // direct spot check on fresh random models.
  {
    Rng rng(808);
    bool direct = true;
    for (int trial = 0; trial < 20; ++trial) {
      FactorModelConfig mcfg;
      mcfg.d_in = 16;
      mcfg.d_feat = 8;
      mcfg.backbone_hidden = {12};
      mcfg.age_head_hidden = {8};
      FactorModel m = FactorModel::init(mcfg, 5, rng);
      FeatureTriple t = factor_forward(m, rng.normal_matrix(9, 16, 0.0, 2.0));
      if (!t.reconstruction_exact()) direct = false;
    }
    const bool pass = recon_ok && direct && total_steps > 0;
    report(8, pass, "bitwise x_id + x_age == x on every training forward pass",
           recon_ok ? std::to_string(total_steps) + " checked steps, 20/20 direct checks"
                    : recon_detail);
  }
}

// ---------------------------------------------------------------------------
// 9. Parameter-partition hygiene and bitwise determinism over 5 epochs.

bool params_bitwise_equal(const FactorModel& a, const FactorModel& b) {
  auto ga = a.param_groups();
  auto gb = b.param_groups();
  if (ga.size() != gb.size()) return false;
  for (std::size_t i = 0; i < ga.size(); ++i)
    if (ga[i].first != gb[i].first || !ga[i].second->bitwise_equal(*gb[i].second))
      return false;
  return true;
}

void criterion_9() {
  GenSpec spec;
  Rng gen_rng(1);
  Dataset ds = generate(spec, gen_rng);
  Rng split_rng(1);
  SplitResult split = split_cross_age(ds.samples, split_rng, 0.2);

  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 1;
  cfg.model.d_in = spec.d_in;

  // (a) bitwise-reproducible logs and final parameters
  TrainResult r1 = fit(cfg, split.train);
  TrainResult r2 = fit(cfg, split.train);
  bool repro = r1.log.size() == r2.log.size();
  if (repro)
    for (std::size_t i = 0; i < r1.log.size(); ++i)
      if (csv_row(r1.log[i]) != csv_row(r2.log[i])) repro = false;
  repro = repro && params_bitwise_equal(r1.model, r2.model) &&
          r1.cmm.w_id.bitwise_equal(r2.cmm.w_id) && r1.cmm.w_age.bitwise_equal(r2.cmm.w_age);

  // (b) schedule: MAX for max_phase_iters then MIN for min_phase_iters
  bool schedule = true;
  const std::size_t cycle = cfg.max_phase_iters + cfg.min_phase_iters;
  for (std::size_t i = 0; i < r1.log.size(); ++i) {
    const Phase expected = (i % cycle) < cfg.max_phase_iters ? Phase::kMax : Phase::kMin;
    if (r1.log[i].phase != expected) schedule = false;
  }

  // (c) per-step hygiene with explicit snapshots over the same 5 epochs
  TrainConfig hcfg = cfg;
  hcfg.finalize();
  auto [id_labels_all, n_train_id] = dense_identity_labels(split.train);
  Rng rng(hcfg.seed);
  Rng init_rng = rng.split(0);
  FactorModel model = FactorModel::init(hcfg.model, n_train_id, init_rng);
  CmmParams cmm = CmmParams::init(hcfg.model.d_feat, init_rng);

  const std::size_t n = split.train.size();
  const std::size_t iters_per_epoch = (n + hcfg.batch_size - 1) / hcfg.batch_size;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  bool hygiene = true;
  std::size_t global_step = 0;
  for (std::size_t epoch = 0; epoch < hcfg.epochs && hygiene; ++epoch) {
    Rng shuffle_rng = rng.split(1000 + epoch);
    shuffle_rng.shuffle(order);
    for (std::size_t it = 0; it < iters_per_epoch && hygiene; ++it) {
      const std::size_t begin = it * hcfg.batch_size;
      const std::size_t end = std::min(begin + hcfg.batch_size, n);
      Matrix inputs(end - begin, hcfg.model.d_in);
      std::vector<std::size_t> id_labels, age_labels;
      for (std::size_t b = begin; b < end; ++b) {
        const Sample& s = split.train[order[b]];
        for (std::size_t j = 0; j < hcfg.model.d_in; ++j) inputs(b - begin, j) = s.input(0, j);
        id_labels.push_back(id_labels_all[order[b]]);
        age_labels.push_back(static_cast<std::size_t>(s.age_group));
      }
      const bool is_max = (global_step % cycle) < hcfg.max_phase_iters;
      const FactorModel model_before = model;
      const CmmParams cmm_before = cmm;
      if (is_max) {
        train_step_max(model, cmm, inputs, hcfg.epsilon, hcfg.lr);
        if (!params_bitwise_equal(model, model_before)) hygiene = false;
      } else {
        train_step_min(model, cmm, inputs, id_labels, age_labels, hcfg, hcfg.lr);
        if (!cmm.w_id.bitwise_equal(cmm_before.w_id) ||
            !cmm.w_age.bitwise_equal(cmm_before.w_age))
          hygiene = false;
      }
      ++global_step;
    }
  }

  const bool pass = repro && schedule && hygiene;
  report(9, pass, "phase-frozen parameters and bitwise-reproducible 5-epoch run",
         std::string("repro=") + (repro ? "yes" : "NO") + " schedule=" +
             (schedule ? "yes" : "NO") + " hygiene=" + (hygiene ? "yes" : "NO") + " over " +
             std::to_string(global_step) + " steps");
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  comparative_criteria();
  criterion_9();
  if (g_failures == 0) {
    std::printf("all acceptance criteria passed\n");
    return 0;
  }
  std::printf("%d acceptance criteria FAILED\n", g_failures);
  return 1;
}
