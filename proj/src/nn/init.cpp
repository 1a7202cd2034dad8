#include "vgdp/nn/init.hpp"

#include <cmath>

namespace vgdp::nn {

Tensor he_init(Rng& rng, Shape shape, int fan_in) {
  if (fan_in <= 0) throw UsageError("he_init: fan_in must be positive");
  return normal_init(rng, std::move(shape), std::sqrt(2.0f / static_cast<float>(fan_in)));
}

Tensor normal_init(Rng& rng, Shape shape, float stddev) {
  Tensor t = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
  for (auto& v : t.data()) v = rng.normalf() * stddev;
  return t;
}

Tensor zeros_init(Shape shape) { return Tensor::zeros(std::move(shape), /*requires_grad=*/true); }

Tensor ones_init(Shape shape) {
  return Tensor::full(std::move(shape), 1.0f, /*requires_grad=*/true);
}

}  // namespace vgdp::nn
