#include "dal/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace dal {

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::kBaseline: return "baseline";
    case Mode::kPlusAge: return "plus_age";
    case Mode::kPlusAgeDal: return "plus_age_dal";
  }
  return "?";
}

std::optional<Mode> parse_mode(const std::string& s) {
  if (s == "baseline") return Mode::kBaseline;
  if (s == "plus_age") return Mode::kPlusAge;
  if (s == "plus_age_dal") return Mode::kPlusAgeDal;
  return std::nullopt;
}

std::vector<std::pair<std::size_t, double>> TrainConfig::default_milestones(
    std::size_t epochs) {
  std::vector<std::pair<std::size_t, double>> m;
  const auto e1 = static_cast<std::size_t>(0.55 * static_cast<double>(epochs));
  const auto e2 = static_cast<std::size_t>(0.82 * static_cast<double>(epochs));
  if (e1 > 0) m.emplace_back(e1, 0.1);
  if (e2 > e1) m.emplace_back(e2, 0.1);
  return m;
}

void TrainConfig::finalize() {
  if (mode == Mode::kBaseline) {
    lambda1 = 0.0;
    lambda2 = 0.0;
  } else if (mode == Mode::kPlusAge) {
    lambda2 = 0.0;
  }
  if (lambda1 < 0.0 || lambda2 < 0.0)
    throw std::invalid_argument("TrainConfig: negative lambda");
  if (max_phase_iters < 1 || min_phase_iters < 1)
    throw std::invalid_argument("TrainConfig: phase lengths must be >= 1");
  if (batch_size < 2) throw std::invalid_argument("TrainConfig: batch_size must be >= 2");
  if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be > 0");
  if (!(epsilon > 0.0)) throw std::invalid_argument("TrainConfig: epsilon must be > 0");
  if (lr_milestones.empty()) lr_milestones = default_milestones(epochs);
}

namespace {

void renormalize(Matrix& w) {
  const double n = frobenius_norm(w);
  if (n > 0.0) w *= 1.0 / n;
}

void apply_update(Matrix& param, const Matrix& grad, double lr) {
  Matrix step = grad;
  step *= lr;
  param -= step;
}

}  // namespace

StepMetrics train_step_max(const FactorModel& model, CmmParams& cmm, const Matrix& inputs,
                           double epsilon, double lr, std::size_t* bcca_backward_calls) {
  FeatureTriple t = factor_forward(model, inputs);
  if (!t.reconstruction_exact())
    throw std::runtime_error("train_step_max: x_id + x_age != x");

  BccaBatch batch = cmm_forward(cmm, t.x_id, t.x_age, epsilon);
  if (!std::isfinite(batch.rho)) {
    std::ostringstream msg;
    msg << "train_step_max: non-finite rho (mu_id=" << batch.mu_id
        << " mu_age=" << batch.mu_age << " var_id=" << batch.var_id
        << " var_age=" << batch.var_age << ")";
    throw std::runtime_error(msg.str());
  }

  StepMetrics m;
  m.rho_before = std::fabs(batch.rho);

  const DalObjective obj = dal_objective(batch.rho);
  BccaGrads gv = bcca_backward(batch);
  if (bcca_backward_calls) ++*bcca_backward_calls;
  gv.grad_v_id *= obj.sign_factor;
  gv.grad_v_age *= obj.sign_factor;
  CmmGrads gc = cmm_backward(cmm, t.x_id, t.x_age, gv.grad_v_id, gv.grad_v_age);

  // Ascent on |rho|.
  apply_update(cmm.w_id, gc.grad_w_id, -lr);
  apply_update(cmm.w_age, gc.grad_w_age, -lr);
  renormalize(cmm.w_id);
  renormalize(cmm.w_age);

  m.rho_after = std::fabs(cmm_forward(cmm, t.x_id, t.x_age, epsilon).rho);
  m.loss.rho_abs = m.rho_after;
  return m;
}

StepMetrics train_step_min(FactorModel& model, const CmmParams& cmm, const Matrix& inputs,
                           const std::vector<std::size_t>& id_labels,
                           const std::vector<std::size_t>& age_labels,
                           const TrainConfig& config, double lr,
                           std::size_t* bcca_backward_calls) {
  TapeRecord tape;
  FeatureTriple t = factor_forward(model, inputs, &tape);
  if (!t.reconstruction_exact())
    throw std::runtime_error("train_step_min: x_id + x_age != x");

  CosFaceCache cos_cache;
  const double l_id = cosface_forward(t.x_id, model.id_weights, id_labels, config.cosface,
                                      &cos_cache);
  CosFaceGrads cos_grads = cosface_backward(t.x_id, model.id_weights, cos_cache);

  MlpTape head_tape;
  Matrix logits = age_head_forward(model.age_head, t.x_age, &head_tape);
  SoftmaxCeResult age = softmax_ce(logits, age_labels);

  Matrix grad_x_id = cos_grads.grad_x_id;
  Matrix grad_x_age(t.x_age.rows(), t.x_age.cols());

  MlpGrads head_grads;
  const bool use_age = config.lambda1 > 0.0;
  if (use_age) {
    Matrix g_logits = age.grad_logits;
    g_logits *= config.lambda1;
    head_grads = mlp_backward(model.age_head, head_tape, g_logits);
    grad_x_age += head_grads.grad_input;
  }

  double rho_abs = 0.0;
  if (config.lambda2 > 0.0) {
    BccaBatch bb = cmm_forward(cmm, t.x_id, t.x_age, config.epsilon);
    const DalObjective obj = dal_objective(bb.rho);
    rho_abs = obj.value;
    BccaGrads gv = bcca_backward(bb);
    if (bcca_backward_calls) ++*bcca_backward_calls;
    gv.grad_v_id *= config.lambda2 * obj.sign_factor;
    gv.grad_v_age *= config.lambda2 * obj.sign_factor;
    CmmGrads gc = cmm_backward(cmm, t.x_id, t.x_age, gv.grad_v_id, gv.grad_v_age);
    grad_x_id += gc.grad_x_id;
    grad_x_age += gc.grad_x_age;
  }

  StepMetrics m;
  m.loss = combine(l_id, age.loss, rho_abs, config.lambda1, config.lambda2);
  if (!std::isfinite(m.loss.total)) {
    std::ostringstream msg;
    msg << "train_step_min: non-finite loss (l_id=" << l_id << " l_age=" << age.loss
        << " rho_abs=" << rho_abs << ")";
    throw std::runtime_error(msg.str());
  }

  FactorGrads fg = factor_backward(model, tape, grad_x_id, grad_x_age);

  sgd_update(model.backbone, fg.backbone, lr);
  sgd_update(model.rfm, fg.rfm, lr);
  if (use_age) sgd_update(model.age_head, head_grads, lr);
  apply_update(model.id_weights, cos_grads.grad_weights, lr);
  return m;
}

std::pair<std::vector<std::size_t>, std::size_t> dense_identity_labels(
    const std::vector<Sample>& samples) {
  std::map<std::size_t, std::size_t> remap;
  for (const auto& s : samples) remap.emplace(s.identity_label, 0);
  std::size_t next = 0;
  for (auto& [orig, dense] : remap) dense = next++;
  std::vector<std::size_t> labels;
  labels.reserve(samples.size());
  for (const auto& s : samples) labels.push_back(remap.at(s.identity_label));
  return {labels, next};
}

TrainResult fit(const TrainConfig& config_in, const std::vector<Sample>& train_samples,
                const StepCallback& on_step) {
  TrainConfig config = config_in;
  config.finalize();
  if (train_samples.empty()) throw std::invalid_argument("fit: empty training set");
  const std::size_t d_in = train_samples[0].input.cols();
  if (d_in != config.model.d_in)
    throw std::invalid_argument("fit: dataset d_in does not match model config");

  auto [id_labels_all, n_train_id] = dense_identity_labels(train_samples);

  Rng rng(config.seed);
  Rng init_rng = rng.split(0);
  TrainResult result{FactorModel::init(config.model, n_train_id, init_rng),
                     CmmParams::init(config.model.d_feat, init_rng),
                     {},
                     0,
                     0};

  const std::size_t n = train_samples.size();
  const std::size_t iters_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const bool adversarial = config.lambda2 > 0.0;
  const std::size_t cycle = config.max_phase_iters + config.min_phase_iters;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  std::size_t global_step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double lr = config.lr;
    for (const auto& [ms_epoch, factor] : config.lr_milestones)
      if (epoch >= ms_epoch) lr *= factor;
    // The max player uses a stronger, undecayed rate: its projections are
    // renormalized every step, so the ascent is scale-free, and a decayed
    // adversary stops tracking the top canonical direction late in
    // training, which would let residual correlation creep back.
    const double max_lr = config.lr * 10.0;

    Rng shuffle_rng = rng.split(1000 + epoch);
    shuffle_rng.shuffle(order);

    for (std::size_t it = 0; it < iters_per_epoch; ++it) {
      const std::size_t begin = it * config.batch_size;
      const std::size_t end = std::min(begin + config.batch_size, n);
      const std::size_t bs = end - begin;

      Matrix inputs(bs, d_in);
      std::vector<std::size_t> id_labels(bs), age_labels(bs);
      for (std::size_t b = 0; b < bs; ++b) {
        const Sample& s = train_samples[order[begin + b]];
        for (std::size_t j = 0; j < d_in; ++j) inputs(b, j) = s.input(0, j);
        id_labels[b] = id_labels_all[order[begin + b]];
        age_labels[b] = static_cast<std::size_t>(s.age_group);
      }

      Phase phase = Phase::kMin;
      bool fresh_adversary = false;
      if (adversarial) {
        const std::size_t pos = global_step % cycle;
        if (config.start_with_max)
          phase = pos < config.max_phase_iters ? Phase::kMax : Phase::kMin;
        else
          phase = pos < config.min_phase_iters ? Phase::kMin : Phase::kMax;
        fresh_adversary =
            phase == Phase::kMax &&
            pos == (config.start_with_max ? 0 : config.min_phase_iters);
      }

      StepLog row;
      row.step = global_step;
      row.phase = phase;
      row.lr = phase == Phase::kMax ? max_lr : lr;
      try {
        if (phase == Phase::kMax) {
          // Restart the adversary from a fresh random projection each max
          // phase: a warm-started adversary fixates on one direction and
          // the min player then only ever decorrelates along it, while a
          // restarted one sweeps the residually-correlated subspace.
          if (fresh_adversary) {
            Rng reinit_rng = rng.split(2000000 + global_step);
            result.cmm = CmmParams::init(config.model.d_feat, reinit_rng);
          }
          StepMetrics sm = train_step_max(result.model, result.cmm, inputs, config.epsilon,
                                          max_lr, &result.bcca_backward_calls);
          row.rho_abs = sm.rho_after;
          row.l_id = 0.0;
          row.l_age = 0.0;
          row.total = sm.rho_after;
        } else {
          StepMetrics sm = train_step_min(result.model, result.cmm, inputs, id_labels,
                                          age_labels, config, lr,
                                          &result.bcca_backward_calls);
          row.rho_abs = sm.loss.rho_abs;
          row.l_id = sm.loss.l_id;
          row.l_age = sm.loss.l_age;
          row.total = sm.loss.total;
        }
      } catch (const std::exception& e) {
        throw std::runtime_error("fit: iteration " + std::to_string(global_step) + ": " +
                                 e.what());
      }
      ++result.reconstruction_checks;
      result.log.push_back(row);
      if (on_step) on_step(row);
      ++global_step;
    }
  }
  return result;
}

std::string csv_header() { return "step,phase,rho_abs,l_id,l_age,total,lr"; }

std::string csv_row(const StepLog& row) {
  std::string s = std::to_string(row.step);
  s += row.phase == Phase::kMax ? ",MAX," : ",MIN,";
  s += format_double(row.rho_abs);
  s += ',';
  s += format_double(row.l_id);
  s += ',';
  s += format_double(row.l_age);
  s += ',';
  s += format_double(row.total);
  s += ',';
  s += format_double(row.lr);
  return s;
}

}  // namespace dal
