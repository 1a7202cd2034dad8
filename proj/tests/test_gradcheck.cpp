// Finite-difference verification of every backward implementation. Central
// differences with per-element step h*max(1,|x|) give ~1e-4 relative accuracy
// in float32 on well-scaled functions, so the pass tolerance is a mixed
// absolute/relative bound well above that noise floor but far below any
// plausible implementation error.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "vgdp/common.hpp"
#include "vgdp/nn/ops.hpp"

using namespace vgdp;
using namespace vgdp::nn;

namespace {

Tensor random_leaf(Rng& rng, Shape shape, float scale_v = 1.0f) {
  Tensor t = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
  for (auto& v : t.data()) v = rng.normalf() * scale_v;
  return t;
}

// Fixed random projection to a scalar so every output element influences the
// loss with a distinct weight.
Tensor to_scalar(const Tensor& t, uint64_t seed) {
  Rng rng(seed);
  Tensor w = Tensor::zeros(t.shape());
  for (auto& v : w.data()) v = rng.normalf();
  return sum_all(mul(t, w));
}

void gradcheck(const char* name, const std::function<Tensor()>& loss_fn,
               std::vector<Tensor> leaves, float h = 1e-2f, float rtol = 2e-2f,
               float atol = 2e-3f) {
  for (auto& p : leaves) p.zero_grad();
  Tensor loss = loss_fn();
  REQUIRE(loss.size() == 1);
  loss.backward();
  for (size_t li = 0; li < leaves.size(); ++li) {
    Tensor& p = leaves[li];
    const std::vector<float> g = p.grad();
    for (size_t i = 0; i < p.data().size(); ++i) {
      const float orig = p.data()[i];
      const float hh = h * std::max(1.0f, std::abs(orig));
      p.data()[i] = orig + hh;
      const float lp = loss_fn().item();
      p.data()[i] = orig - hh;
      const float lm = loss_fn().item();
      p.data()[i] = orig;
      const float fd = (lp - lm) / (2.0f * hh);
      const float err = std::abs(g[i] - fd);
      const float tol = atol + rtol * std::max(std::abs(g[i]), std::abs(fd));
      CAPTURE(name);
      CAPTURE(li);
      CAPTURE(i);
      CAPTURE(g[i]);
      CAPTURE(fd);
      CHECK(err <= tol);
    }
  }
}

}  // namespace

TEST_CASE("gradcheck elementwise chain") {
  Rng rng(100);
  Tensor a = random_leaf(rng, {2, 3});
  Tensor b = random_leaf(rng, {2, 3});
  gradcheck("elementwise", [&] {
    return to_scalar(mul(add(a, scale(b, 0.5f)), sub(a, b)), 1);
  }, {a, b});
}

TEST_CASE("gradcheck relu away from the kink") {
  Rng rng(101);
  Tensor x = Tensor::zeros({3, 4}, true);
  for (auto& v : x.data()) {
    float r = rng.normalf();
    v = (r >= 0 ? 0.2f : -0.2f) + r;  // keep |x| >= 0.2 so FD never crosses 0
  }
  gradcheck("relu", [&] { return to_scalar(relu(x), 2); }, {x});
}

TEST_CASE("gradcheck add_bias") {
  Rng rng(102);
  Tensor x = random_leaf(rng, {3, 5});
  Tensor b = random_leaf(rng, {5});
  gradcheck("add_bias", [&] { return to_scalar(add_bias(x, b), 3); }, {x, b});
}

TEST_CASE("gradcheck matmul") {
  Rng rng(103);
  Tensor a = random_leaf(rng, {3, 4});
  Tensor b = random_leaf(rng, {4, 2});
  gradcheck("matmul", [&] { return to_scalar(matmul(a, b), 4); }, {a, b});
}

TEST_CASE("gradcheck bmm") {
  Rng rng(104);
  Tensor a = random_leaf(rng, {2, 3, 4});
  Tensor b = random_leaf(rng, {2, 4, 3});
  gradcheck("bmm", [&] { return to_scalar(bmm(a, b), 5); }, {a, b});
}

TEST_CASE("gradcheck transpose_last2") {
  Rng rng(105);
  Tensor a = random_leaf(rng, {2, 3, 4});
  gradcheck("transpose", [&] { return to_scalar(transpose_last2(a), 6); }, {a});
}

TEST_CASE("gradcheck linear") {
  Rng rng(106);
  Tensor x = random_leaf(rng, {4, 6});
  Tensor w = random_leaf(rng, {6, 3});
  Tensor b = random_leaf(rng, {3});
  gradcheck("linear", [&] { return to_scalar(linear(x, w, b), 7); }, {x, w, b});
}

TEST_CASE("gradcheck conv2d stride 1 pad 1") {
  Rng rng(107);
  Tensor x = random_leaf(rng, {2, 2, 4, 4}, 0.5f);
  Tensor w = random_leaf(rng, {3, 2, 3, 3}, 0.5f);
  Tensor b = random_leaf(rng, {3});
  gradcheck("conv_s1p1", [&] { return to_scalar(conv2d(x, w, b, 1, 1), 8); }, {x, w, b});
}

TEST_CASE("gradcheck conv2d stride 2") {
  Rng rng(108);
  Tensor x = random_leaf(rng, {1, 3, 5, 6}, 0.5f);
  Tensor w = random_leaf(rng, {2, 3, 3, 3}, 0.5f);
  Tensor b = random_leaf(rng, {2});
  gradcheck("conv_s2p1", [&] { return to_scalar(conv2d(x, w, b, 2, 1), 9); }, {x, w, b});
  Tensor w1 = random_leaf(rng, {2, 3, 1, 1}, 0.5f);
  Tensor b1 = random_leaf(rng, {2});
  gradcheck("conv_s2p0_1x1", [&] { return to_scalar(conv2d(x, w1, b1, 2, 0), 10); }, {x, w1, b1});
}

TEST_CASE("gradcheck softmax") {
  Rng rng(109);
  Tensor x = random_leaf(rng, {3, 5});
  gradcheck("softmax", [&] { return to_scalar(softmax(x), 11); }, {x});
}

TEST_CASE("gradcheck layer_norm") {
  Rng rng(110);
  Tensor x = random_leaf(rng, {3, 8});
  Tensor g = random_leaf(rng, {8});
  Tensor b = random_leaf(rng, {8});
  gradcheck("layer_norm", [&] { return to_scalar(layer_norm(x, g, b), 12); }, {x, g, b}, 1e-2f,
            3e-2f, 3e-3f);
}

TEST_CASE("gradcheck reduce_max with separated values") {
  // Values spaced far apart so finite differences cannot flip the argmax.
  std::vector<float> vals{0.1f, 1.3f, 0.7f, 2.1f, -0.5f, 1.9f, 0.4f, -1.2f, 2.6f, -0.9f, 1.0f,
                          -2.0f};
  Tensor x = Tensor::from(vals, {3, 4}, true);
  gradcheck("reduce_max_ax1", [&] { return to_scalar(reduce_max(x, 1), 13); }, {x});
  gradcheck("reduce_max_ax0", [&] { return to_scalar(reduce_max(x, 0), 14); }, {x});
}

TEST_CASE("gradcheck means and sums") {
  Rng rng(111);
  Tensor x = random_leaf(rng, {2, 3, 4});
  gradcheck("reduce_mean1", [&] { return to_scalar(reduce_mean(x, 1), 15); }, {x});
  gradcheck("mean_all", [&] { return mean_all(mul(x, x)); }, {x});
  gradcheck("sum_all", [&] { return sum_all(mul(x, scale(x, 0.25f))); }, {x});
}

TEST_CASE("gradcheck reshape concat slice scatter") {
  Rng rng(112);
  Tensor a = random_leaf(rng, {2, 6});
  Tensor b = random_leaf(rng, {2, 3});
  gradcheck("reshape", [&] { return to_scalar(reshape(a, {3, 4}), 16); }, {a});
  gradcheck("concat1", [&] { return to_scalar(concat({a, b}, 1), 17); }, {a, b});
  Tensor c = random_leaf(rng, {1, 6});
  gradcheck("concat0", [&] { return to_scalar(concat({a, c}, 0), 18); }, {a, c});
  gradcheck("slice", [&] { return to_scalar(slice_last(a, 2, 3), 19); }, {a});
  gradcheck("scatter", [&] { return to_scalar(scatter_rows(b, {3, 1}, 5), 20); }, {b});
}

TEST_CASE("gradcheck attention") {
  Rng rng(113);
  Tensor q = random_leaf(rng, {3, 4});
  Tensor k = random_leaf(rng, {5, 4});
  Tensor v = random_leaf(rng, {5, 2});
  gradcheck("attention2d", [&] { return to_scalar(scaled_dot_attention(q, k, v), 21); },
            {q, k, v});
  Tensor q3 = random_leaf(rng, {2, 3, 4});
  Tensor k3 = random_leaf(rng, {2, 4, 4});
  Tensor v3 = random_leaf(rng, {2, 4, 3});
  gradcheck("attention3d", [&] { return to_scalar(scaled_dot_attention(q3, k3, v3), 22); },
            {q3, k3, v3});
}

TEST_CASE("gradcheck composite mlp") {
  Rng rng(114);
  Tensor x = random_leaf(rng, {4, 5});
  Tensor w1 = random_leaf(rng, {5, 8}, 0.5f);
  Tensor b1 = random_leaf(rng, {8}, 0.1f);
  Tensor g = random_leaf(rng, {8}, 0.5f);
  Tensor gb = random_leaf(rng, {8}, 0.1f);
  Tensor w2 = random_leaf(rng, {8, 3}, 0.5f);
  Tensor b2 = random_leaf(rng, {3}, 0.1f);
  gradcheck(
      "mlp",
      [&] {
        Tensor h1 = relu(linear(x, w1, b1));
        Tensor n1 = layer_norm(h1, g, gb);
        return to_scalar(linear(n1, w2, b2), 23);
      },
      {x, w1, b1, g, gb, w2, b2}, 1e-2f, 3e-2f, 4e-3f);
}
