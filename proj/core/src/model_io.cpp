#include "dal/model_io.hpp"

#include <map>
#include <stdexcept>

#include "dal/checkpoint.hpp"

namespace dal {

void save_model(const FactorModel& model, const CmmParams& cmm, const std::string& path) {
  auto groups = model.param_groups();
  groups.emplace_back("cmm.w_id", &cmm.w_id);
  groups.emplace_back("cmm.w_age", &cmm.w_age);
  Matrix relu_flag(1, 1, model.cfg.rfm_output_relu ? 1.0 : 0.0);
  groups.emplace_back("meta.rfm_output_relu", &relu_flag);
  write_checkpoint_file(groups, path);
}

std::pair<FactorModel, CmmParams> load_model(const std::string& path) {
  auto raw = read_checkpoint_file(path);
  std::map<std::string, Matrix> groups;
  for (auto& [name, mat] : raw) groups.emplace(std::move(name), std::move(mat));

  auto take = [&](const std::string& name) -> Matrix {
    auto it = groups.find(name);
    if (it == groups.end())
      throw std::runtime_error("load_model: missing parameter group '" + name + "'");
    Matrix m = std::move(it->second);
    groups.erase(it);
    return m;
  };

  auto take_mlp = [&](const std::string& prefix, bool output_relu) {
    MlpParams mlp;
    mlp.output_relu = output_relu;
    for (std::size_t l = 0;; ++l) {
      const std::string wname = prefix + ".w" + std::to_string(l);
      if (groups.find(wname) == groups.end()) break;
      MlpParams::Layer layer;
      layer.weight = take(wname);
      layer.bias = take(prefix + ".b" + std::to_string(l));
      mlp.layers.push_back(std::move(layer));
    }
    if (mlp.layers.empty())
      throw std::runtime_error("load_model: missing parameter group '" + prefix + "'");
    return mlp;
  };

  const Matrix relu_flag = take("meta.rfm_output_relu");

  FactorModel model;
  model.cfg.rfm_output_relu = relu_flag(0, 0) != 0.0;
  model.backbone = take_mlp("backbone", false);
  model.rfm = take_mlp("rfm", model.cfg.rfm_output_relu);
  model.age_head = take_mlp("age_head", false);
  model.id_weights = take("id_weights");
  model.cfg.d_in = model.backbone.input_dim();
  model.cfg.d_feat = model.backbone.output_dim();
  model.cfg.backbone_hidden.clear();
  for (std::size_t l = 0; l + 1 < model.backbone.layers.size(); ++l)
    model.cfg.backbone_hidden.push_back(model.backbone.layers[l].weight.cols());
  model.cfg.age_head_hidden.clear();
  for (std::size_t l = 0; l + 1 < model.age_head.layers.size(); ++l)
    model.cfg.age_head_hidden.push_back(model.age_head.layers[l].weight.cols());

  CmmParams cmm;
  cmm.w_id = take("cmm.w_id");
  cmm.w_age = take("cmm.w_age");
  if (cmm.w_id.rows() != model.cfg.d_feat || cmm.w_age.rows() != model.cfg.d_feat)
    throw std::runtime_error("load_model: CMM dims do not match feature dim");
  return {std::move(model), std::move(cmm)};
}

}  // namespace dal
