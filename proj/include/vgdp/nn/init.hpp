#pragma once

#include "vgdp/common.hpp"
#include "vgdp/nn/tensor.hpp"

namespace vgdp::nn {

// He-normal fan-in initialization for relu networks: N(0, sqrt(2 / fan_in)).
Tensor he_init(Rng& rng, Shape shape, int fan_in);

Tensor normal_init(Rng& rng, Shape shape, float stddev);

// Trainable zero / one tensors (biases, layer-norm parameters).
Tensor zeros_init(Shape shape);
Tensor ones_init(Shape shape);

}  // namespace vgdp::nn
