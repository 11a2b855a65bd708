#include "dal/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>

#include "dal/grad_check.hpp"
#include "dal/losses.hpp"

namespace dal {

const Matrix* NamedGrads::find(const std::string& name) const {
  for (const auto& [n, m] : grads)
    if (n == name) return &m;
  return nullptr;
}

double total_loss(const FactorModel& model, const CmmParams& cmm, const Matrix& inputs,
                  const std::vector<std::size_t>& id_labels,
                  const std::vector<std::size_t>& age_labels, const TrainConfig& config) {
  FeatureTriple t = factor_forward(model, inputs);
  const double l_id = cosface_forward(t.x_id, model.id_weights, id_labels, config.cosface);
  const Matrix logits = age_head_forward(model.age_head, t.x_age);
  const double l_age = softmax_ce(logits, age_labels).loss;
  double rho_abs = 0.0;
  if (config.lambda2 > 0.0)
    rho_abs = dal_objective(cmm_forward(cmm, t.x_id, t.x_age, config.epsilon).rho).value;
  return combine(l_id, l_age, rho_abs, config.lambda1, config.lambda2).total;
}

NamedGrads total_loss_grads(const FactorModel& model, const CmmParams& cmm,
                            const Matrix& inputs, const std::vector<std::size_t>& id_labels,
                            const std::vector<std::size_t>& age_labels,
                            const TrainConfig& config) {
  TapeRecord tape;
  FeatureTriple t = factor_forward(model, inputs, &tape);

  CosFaceCache cos_cache;
  cosface_forward(t.x_id, model.id_weights, id_labels, config.cosface, &cos_cache);
  CosFaceGrads cos_grads = cosface_backward(t.x_id, model.id_weights, cos_cache);

  MlpTape head_tape;
  Matrix logits = age_head_forward(model.age_head, t.x_age, &head_tape);
  Matrix g_logits = softmax_ce(logits, age_labels).grad_logits;
  g_logits *= config.lambda1;
  MlpGrads head_grads = mlp_backward(model.age_head, head_tape, g_logits);

  Matrix grad_x_id = cos_grads.grad_x_id;
  Matrix grad_x_age = head_grads.grad_input;

  Matrix grad_w_id(cmm.w_id.rows(), 1);
  Matrix grad_w_age(cmm.w_age.rows(), 1);
  if (config.lambda2 > 0.0) {
    BccaBatch bb = cmm_forward(cmm, t.x_id, t.x_age, config.epsilon);
    const DalObjective obj = dal_objective(bb.rho);
    BccaGrads gv = bcca_backward(bb);
    gv.grad_v_id *= config.lambda2 * obj.sign_factor;
    gv.grad_v_age *= config.lambda2 * obj.sign_factor;
    CmmGrads gc = cmm_backward(cmm, t.x_id, t.x_age, gv.grad_v_id, gv.grad_v_age);
    grad_x_id += gc.grad_x_id;
    grad_x_age += gc.grad_x_age;
    grad_w_id = gc.grad_w_id;
    grad_w_age = gc.grad_w_age;
  }

  FactorGrads fg = factor_backward(model, tape, grad_x_id, grad_x_age);

  NamedGrads out;
  auto add_mlp = [&](const std::string& prefix, const MlpGrads& g) {
    for (std::size_t l = 0; l < g.layers.size(); ++l) {
      out.grads.emplace_back(prefix + ".w" + std::to_string(l), g.layers[l].weight);
      out.grads.emplace_back(prefix + ".b" + std::to_string(l), g.layers[l].bias);
    }
  };
  add_mlp("backbone", fg.backbone);
  add_mlp("rfm", fg.rfm);
  add_mlp("age_head", head_grads);
  out.grads.emplace_back("id_weights", cos_grads.grad_weights);
  out.grads.emplace_back("cmm.w_id", grad_w_id);
  out.grads.emplace_back("cmm.w_age", grad_w_age);
  return out;
}

namespace {

GradCheckRow make_row(const std::string& name, double err, double tol) {
  return {name, err, tol, err <= tol};
}

}  // namespace

std::vector<GradCheckRow> run_gradcheck(std::uint64_t seed, bool corrupt_bcca_sign) {
  std::vector<GradCheckRow> rows;
  Rng rng(seed);

  // BCCA: Eq-level gradient wrt the canonical variables. The scalar
  // function is the module's own forward, evaluated through unit
  // projections so the variables are exposed directly.
  {
    const std::size_t m = 16;
    const double eps = 1e-5;
    CmmParams unit;
    unit.w_id = Matrix(1, 1, 1.0);
    unit.w_age = Matrix(1, 1, 1.0);
    Matrix v_id = rng.normal_matrix(m, 1, 0.0, 1.0);
    Matrix v_age = rng.normal_matrix(m, 1, 0.0, 1.0);
    BccaBatch batch = cmm_forward(unit, v_id, v_age, eps);
    BccaGrads g = bcca_backward(batch);
    if (corrupt_bcca_sign) g.grad_v_id *= -1.0;

    Matrix fd_id = finite_diff_grad(
        [&](const Matrix& v) { return cmm_forward(unit, v, v_age, eps).rho; }, v_id);
    Matrix fd_age = finite_diff_grad(
        [&](const Matrix& v) { return cmm_forward(unit, v_id, v, eps).rho; }, v_age);
    const double err = std::max(grad_rel_error(g.grad_v_id, fd_id),
                                grad_rel_error(g.grad_v_age, fd_age));
    rows.push_back(make_row("bcca_dv", err, 1e-6));
  }

  // CMM projection gradients through the full rho forward.
  {
    const std::size_t m = 12, d = 6;
    const double eps = 1e-5;
    Rng wrng = rng.split(2);
    CmmParams cmm = CmmParams::init(d, wrng);
    Matrix x_id = rng.normal_matrix(m, d, 0.0, 1.0);
    Matrix x_age = rng.normal_matrix(m, d, 0.0, 1.0);
    BccaBatch batch = cmm_forward(cmm, x_id, x_age, eps);
    BccaGrads gv = bcca_backward(batch);
    CmmGrads gc = cmm_backward(cmm, x_id, x_age, gv.grad_v_id, gv.grad_v_age);

    auto rho_of_w = [&](const Matrix& w, bool id_side) {
      CmmParams c = cmm;
      (id_side ? c.w_id : c.w_age) = w;
      return cmm_forward(c, x_id, x_age, eps).rho;
    };
    Matrix fd_wid = finite_diff_grad([&](const Matrix& w) { return rho_of_w(w, true); },
                                     cmm.w_id);
    Matrix fd_wage = finite_diff_grad([&](const Matrix& w) { return rho_of_w(w, false); },
                                      cmm.w_age);
    const double err = std::max(grad_rel_error(gc.grad_w_id, fd_wid),
                                grad_rel_error(gc.grad_w_age, fd_wage));
    rows.push_back(make_row("cmm_w", err, 1e-5));
  }

  // CosFace wrt features and classifier weights. Normalization makes this
  // the numerically hardest gradient here.
  {
    const std::size_t n = 6, d = 5, classes = 4;
    CosFaceConfig cfg;
    Matrix x = rng.normal_matrix(n, d, 0.0, 1.0);
    Matrix w = rng.normal_matrix(d, classes, 0.0, 1.0);
    std::vector<std::size_t> labels(n);
    for (auto& l : labels) l = rng.uniform_index(classes);

    CosFaceCache cache;
    cosface_forward(x, w, labels, cfg, &cache);
    CosFaceGrads g = cosface_backward(x, w, cache);

    Matrix fd_x = finite_diff_grad(
        [&](const Matrix& xx) { return cosface_forward(xx, w, labels, cfg); }, x);
    Matrix fd_w = finite_diff_grad(
        [&](const Matrix& ww) { return cosface_forward(x, ww, labels, cfg); }, w);
    const double err =
        std::max(grad_rel_error(g.grad_x_id, fd_x), grad_rel_error(g.grad_weights, fd_w));
    rows.push_back(make_row("cosface", err, 1e-4));
  }

  // Softmax cross-entropy.
  {
    const std::size_t n = 7;
    Matrix logits = rng.normal_matrix(n, kNumAgeGroups, 0.0, 2.0);
    std::vector<std::size_t> labels(n);
    for (auto& l : labels) l = rng.uniform_index(kNumAgeGroups);
    SoftmaxCeResult r = softmax_ce(logits, labels);
    Matrix fd = finite_diff_grad(
        [&](const Matrix& z) { return softmax_ce(z, labels).loss; }, logits);
    rows.push_back(make_row("softmax_ce", grad_rel_error(r.grad_logits, fd), 1e-6));
  }

  // End to end: every trainable parameter against the total loss.
  {
    TrainConfig config;
    config.mode = Mode::kPlusAgeDal;
    config.model.d_in = 10;
    config.model.d_feat = 6;
    config.model.backbone_hidden = {8};
    config.model.age_head_hidden = {8, 8};
    const std::size_t n = 8, n_id = 5;

    Rng mrng = rng.split(3);
    FactorModel model = FactorModel::init(config.model, n_id, mrng);
    CmmParams cmm = CmmParams::init(config.model.d_feat, mrng);
    Matrix inputs = rng.normal_matrix(n, config.model.d_in, 0.0, 1.0);
    std::vector<std::size_t> id_labels(n), age_labels(n);
    for (auto& l : id_labels) l = rng.uniform_index(n_id);
    for (auto& l : age_labels) l = rng.uniform_index(kNumAgeGroups);

    NamedGrads analytic = total_loss_grads(model, cmm, inputs, id_labels, age_labels, config);

    double err = 0.0;
    FactorModel probe = model;
    CmmParams probe_cmm = cmm;
    auto check_param = [&](const std::string& name, Matrix* param) {
      const Matrix* a = analytic.find(name);
      const Matrix original = *param;
      Matrix fd = finite_diff_grad(
          [&](const Matrix& p) {
            *param = p;
            const double v = total_loss(probe, probe_cmm, inputs, id_labels, age_labels,
                                        config);
            return v;
          },
          original);
      *param = original;
      err = std::max(err, grad_rel_error(*a, fd));
    };
    for (auto& [name, param] : probe.param_groups()) check_param(name, param);
    check_param("cmm.w_id", &probe_cmm.w_id);
    check_param("cmm.w_age", &probe_cmm.w_age);
    rows.push_back(make_row("end_to_end", err, 1e-4));
  }

  return rows;
}

bool gradcheck_all_pass(const std::vector<GradCheckRow>& rows) {
  return std::all_of(rows.begin(), rows.end(), [](const GradCheckRow& r) { return r.pass; });
}

}  // namespace dal
