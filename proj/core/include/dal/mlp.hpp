#pragma once

#include <vector>

#include "dal/matrix.hpp"
#include "dal/rng.hpp"

namespace dal {

// Fully connected network with ReLU between layers. The final layer is
// affine unless `output_relu` is set.
struct MlpParams {
  struct Layer {
    Matrix weight;  // d_in x d_out
    Matrix bias;    // 1 x d_out
  };
  std::vector<Layer> layers;
  bool output_relu = false;

  // He initialization: weights ~ N(0, 2/fan_in), biases 0.
  static MlpParams init(const std::vector<std::size_t>& dims, Rng& rng,
                        bool output_relu = false);

  std::size_t input_dim() const { return layers.front().weight.rows(); }
  std::size_t output_dim() const { return layers.back().weight.cols(); }
};

// Layer inputs and pre-activations cached by one forward pass.
struct MlpTape {
  std::vector<Matrix> inputs;   // input to each layer, batch x d
  std::vector<Matrix> preacts;  // pre-activation of each layer
};

struct MlpGrads {
  std::vector<MlpParams::Layer> layers;  // same shapes as params
  Matrix grad_input;                     // batch x d_in
};

Matrix mlp_forward(const MlpParams& mlp, const Matrix& input, MlpTape* tape = nullptr);
MlpGrads mlp_backward(const MlpParams& mlp, const MlpTape& tape, const Matrix& grad_output);

void sgd_update(MlpParams& mlp, const MlpGrads& grads, double lr);

}  // namespace dal
