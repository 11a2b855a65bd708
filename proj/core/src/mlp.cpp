#include "dal/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace dal {

MlpParams MlpParams::init(const std::vector<std::size_t>& dims, Rng& rng, bool output_relu) {
  if (dims.size() < 2) throw std::invalid_argument("MlpParams::init: need >= 2 dims");
  MlpParams mlp;
  mlp.output_relu = output_relu;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(dims[l]));
    Layer layer;
    layer.weight = rng.normal_matrix(dims[l], dims[l + 1], 0.0, stddev);
    layer.bias = Matrix(1, dims[l + 1]);
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

Matrix mlp_forward(const MlpParams& mlp, const Matrix& input, MlpTape* tape) {
  if (input.cols() != mlp.input_dim())
    throw std::invalid_argument("mlp_forward: input dim " + shape_str(input) +
                                " does not match network input " +
                                std::to_string(mlp.input_dim()));
  if (input.rows() == 0) throw std::invalid_argument("mlp_forward: empty batch");
  Matrix h = input;
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    const auto& layer = mlp.layers[l];
    if (tape) tape->inputs.push_back(h);
    Matrix z = matmul(h, layer.weight);
    for (std::size_t i = 0; i < z.rows(); ++i)
      for (std::size_t j = 0; j < z.cols(); ++j) z(i, j) += layer.bias(0, j);
    if (tape) tape->preacts.push_back(z);
    const bool relu = (l + 1 < mlp.layers.size()) || mlp.output_relu;
    if (relu) {
      for (std::size_t k = 0; k < z.size(); ++k)
        if (z.at_flat(k) < 0.0) z.at_flat(k) = 0.0;
    }
    h = std::move(z);
  }
  return h;
}

MlpGrads mlp_backward(const MlpParams& mlp, const MlpTape& tape, const Matrix& grad_output) {
  if (tape.inputs.size() != mlp.layers.size())
    throw std::invalid_argument("mlp_backward: tape does not match network");
  MlpGrads grads;
  grads.layers.resize(mlp.layers.size());

  Matrix g = grad_output;
  for (std::size_t l = mlp.layers.size(); l-- > 0;) {
    const auto& layer = mlp.layers[l];
    const Matrix& z = tape.preacts[l];
    if (!g.same_shape(z))
      throw std::invalid_argument("mlp_backward: gradient shape mismatch at layer " +
                                  std::to_string(l));
    const bool relu = (l + 1 < mlp.layers.size()) || mlp.output_relu;
    if (relu) {
      for (std::size_t k = 0; k < g.size(); ++k)
        if (z.at_flat(k) <= 0.0) g.at_flat(k) = 0.0;
    }
    grads.layers[l].weight = matmul(transpose(tape.inputs[l]), g);
    Matrix bias_grad(1, g.cols());
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) bias_grad(0, j) += g(i, j);
    grads.layers[l].bias = std::move(bias_grad);
    g = matmul(g, transpose(layer.weight));
  }
  grads.grad_input = std::move(g);
  return grads;
}

void sgd_update(MlpParams& mlp, const MlpGrads& grads, double lr) {
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    Matrix wstep = grads.layers[l].weight;
    wstep *= lr;
    mlp.layers[l].weight -= wstep;
    Matrix bstep = grads.layers[l].bias;
    bstep *= lr;
    mlp.layers[l].bias -= bstep;
  }
}

}  // namespace dal
