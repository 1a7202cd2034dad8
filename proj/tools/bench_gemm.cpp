// Microbenchmark for the three GEMM kernels; prints GFLOP/s per kernel.
#include <chrono>
#include <cstdio>
#include <vector>

#include "vgdp/common.hpp"
#include "vgdp/nn/ops.hpp"

using Clock = std::chrono::steady_clock;

int main() {
  const int m = 256, k = 256, n = 256;
  vgdp::Rng rng(7);
  std::vector<float> a(static_cast<size_t>(m) * k), b(static_cast<size_t>(k) * n),
      c(static_cast<size_t>(m) * n, 0.0f);
  for (auto& v : a) v = rng.normalf();
  for (auto& v : b) v = rng.normalf();

  auto time_kernel = [&](const char* name, auto&& fn) {
    fn();  // warm-up
    const int reps = 60;
    auto t0 = Clock::now();
    for (int i = 0; i < reps; ++i) fn();
    auto t1 = Clock::now();
    double sec = std::chrono::duration<double>(t1 - t0).count();
    double flops = 2.0 * m * k * n * reps;
    std::printf("%-8s %7.2f GFLOP/s  (%.3f ms/call)\n", name, flops / sec * 1e-9,
                sec / reps * 1e3);
  };

  time_kernel("gemm_nn", [&] { vgdp::nn::gemm_nn(a.data(), b.data(), c.data(), m, k, n); });
  time_kernel("gemm_tn", [&] { vgdp::nn::gemm_tn(a.data(), b.data(), c.data(), m, k, n); });
  time_kernel("gemm_nt", [&] { vgdp::nn::gemm_nt(a.data(), b.data(), c.data(), m, k, n); });

  // Sizes that actually occur in the desk preset point encoder.
  const int m2 = 256, k2 = 64, n2 = 128;
  std::vector<float> a2(static_cast<size_t>(m2) * k2), b2(static_cast<size_t>(k2) * n2),
      c2(static_cast<size_t>(m2) * n2, 0.0f);
  for (auto& v : a2) v = rng.normalf();
  for (auto& v : b2) v = rng.normalf();
  auto t0 = Clock::now();
  const int reps = 2000;
  for (int i = 0; i < reps; ++i) vgdp::nn::gemm_nn(a2.data(), b2.data(), c2.data(), m2, k2, n2);
  auto t1 = Clock::now();
  double sec = std::chrono::duration<double>(t1 - t0).count();
  std::printf("gemm_nn small (256x64x128): %7.2f GFLOP/s\n",
              2.0 * m2 * k2 * n2 * reps / sec * 1e-9);
  return c[0] == 12345.0f ? 1 : 0;
}
