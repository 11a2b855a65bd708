#include "dal/factor_model.hpp"

#include <cmath>
#include <stdexcept>

namespace dal {

bool FeatureTriple::reconstruction_exact() const {
  Matrix sum = x_id;
  sum += x_age;
  return sum.bitwise_equal(x);
}

FactorModel FactorModel::init(const FactorModelConfig& cfg, std::size_t n_id, Rng& rng) {
  FactorModel m;
  m.cfg = cfg;

  std::vector<std::size_t> backbone_dims = {cfg.d_in};
  backbone_dims.insert(backbone_dims.end(), cfg.backbone_hidden.begin(),
                       cfg.backbone_hidden.end());
  backbone_dims.push_back(cfg.d_feat);
  m.backbone = MlpParams::init(backbone_dims, rng);

  m.rfm = MlpParams::init({cfg.d_feat, cfg.d_feat, cfg.d_feat}, rng, cfg.rfm_output_relu);

  std::vector<std::size_t> head_dims = {cfg.d_feat};
  head_dims.insert(head_dims.end(), cfg.age_head_hidden.begin(), cfg.age_head_hidden.end());
  head_dims.push_back(kNumAgeGroups);
  m.age_head = MlpParams::init(head_dims, rng);

  m.id_weights = rng.normal_matrix(cfg.d_feat, n_id, 0.0, 1.0 / std::sqrt((double)cfg.d_feat));
  return m;
}

namespace {

template <typename Model, typename Mat>
std::vector<std::pair<std::string, Mat*>> collect_groups(Model& m) {
  std::vector<std::pair<std::string, Mat*>> g;
  auto add_mlp = [&](const std::string& prefix, auto& mlp) {
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
      g.emplace_back(prefix + ".w" + std::to_string(l), &mlp.layers[l].weight);
      g.emplace_back(prefix + ".b" + std::to_string(l), &mlp.layers[l].bias);
    }
  };
  add_mlp("backbone", m.backbone);
  add_mlp("rfm", m.rfm);
  add_mlp("age_head", m.age_head);
  g.emplace_back("id_weights", &m.id_weights);
  return g;
}

}  // namespace

std::vector<std::pair<std::string, Matrix*>> FactorModel::param_groups() {
  return collect_groups<FactorModel, Matrix>(*this);
}

std::vector<std::pair<std::string, const Matrix*>> FactorModel::param_groups() const {
  return collect_groups<const FactorModel, const Matrix>(*this);
}

FeatureTriple factor_forward(const FactorModel& model, const Matrix& inputs, TapeRecord* tape) {
  if (inputs.rows() == 0) throw std::invalid_argument("factor_forward: empty batch");
  FeatureTriple t;
  Matrix x_raw = mlp_forward(model.backbone, inputs, tape ? &tape->backbone : nullptr);
  t.x_age = mlp_forward(model.rfm, x_raw, tape ? &tape->rfm : nullptr);
  t.x_id = x_raw;
  t.x_id -= t.x_age;
  // Recombine so x == x_id + x_age holds bitwise; (x - a) + a is not an
  // identity in floating point.
  t.x = t.x_id;
  t.x += t.x_age;
  if (tape) tape->batch = inputs.rows();
  return t;
}

FactorGrads factor_backward(const FactorModel& model, const TapeRecord& tape,
                            const Matrix& grad_x_id, const Matrix& grad_x_age) {
  if (tape.batch != grad_x_id.rows() || tape.batch != grad_x_age.rows())
    throw std::invalid_argument("factor_backward: tape batch does not match gradients");
  if (!grad_x_id.same_shape(grad_x_age))
    throw std::invalid_argument("factor_backward: gradient shape mismatch");

  FactorGrads g;
  Matrix grad_rfm_out = grad_x_age;
  grad_rfm_out -= grad_x_id;  // x_age enters x_id with a minus sign
  g.rfm = mlp_backward(model.rfm, tape.rfm, grad_rfm_out);

  Matrix grad_x = grad_x_id;
  grad_x += g.rfm.grad_input;
  g.backbone = mlp_backward(model.backbone, tape.backbone, grad_x);
  return g;
}

Matrix age_head_forward(const MlpParams& head, const Matrix& x_age, MlpTape* tape) {
  return mlp_forward(head, x_age, tape);
}

}  // namespace dal
