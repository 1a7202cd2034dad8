#include "vgdp/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace vgdp::nn {

namespace {

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void accumulate(std::vector<float>& dst, const std::vector<float>& src) {
  for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// outer * axis * inner decomposition for reductions along one axis.
struct AxisView {
  int outer = 1, axis = 1, inner = 1;
};

AxisView axis_view(const char* op, const Shape& s, int axis) {
  if (axis < 0 || axis >= static_cast<int>(s.size())) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for shape " + shape_str(s));
  }
  AxisView v;
  for (int i = 0; i < axis; ++i) v.outer *= s[static_cast<size_t>(i)];
  v.axis = s[static_cast<size_t>(axis)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

Shape drop_axis(const Shape& s, int axis) {
  Shape out;
  for (int i = 0; i < static_cast<int>(s.size()); ++i) {
    if (i != axis) out.push_back(s[static_cast<size_t>(i)]);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

}  // namespace

void gemm_nn(const float* a, const float* b, float* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const float* arow = a + static_cast<size_t>(i) * k;
    float* crow = c + static_cast<size_t>(i) * n;
    int kk = 0;
    for (; kk + 4 <= k; kk += 4) {
      const float a0 = arow[kk], a1 = arow[kk + 1], a2 = arow[kk + 2], a3 = arow[kk + 3];
      const float* b0 = b + static_cast<size_t>(kk) * n;
      const float* b1 = b0 + n;
      const float* b2 = b1 + n;
      const float* b3 = b2 + n;
#pragma omp simd
      for (int j = 0; j < n; ++j) {
        crow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
      }
    }
    for (; kk < k; ++kk) {
      const float av = arow[kk];
      const float* brow = b + static_cast<size_t>(kk) * n;
#pragma omp simd
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_tn(const float* a, const float* b, float* c, int m, int k, int n) {
  int kk = 0;
  for (; kk + 4 <= k; kk += 4) {
    const float* a0 = a + static_cast<size_t>(kk) * m;
    const float* b0 = b + static_cast<size_t>(kk) * n;
    for (int i = 0; i < m; ++i) {
      const float v0 = a0[i], v1 = a0[m + i], v2 = a0[2 * m + i], v3 = a0[3 * m + i];
      float* crow = c + static_cast<size_t>(i) * n;
      const float* b1 = b0 + n;
      const float* b2 = b1 + n;
      const float* b3 = b2 + n;
#pragma omp simd
      for (int j = 0; j < n; ++j) {
        crow[j] += v0 * b0[j] + v1 * b1[j] + v2 * b2[j] + v3 * b3[j];
      }
    }
  }
  for (; kk < k; ++kk) {
    const float* arow = a + static_cast<size_t>(kk) * m;
    const float* brow = b + static_cast<size_t>(kk) * n;
    for (int i = 0; i < m; ++i) {
      const float av = arow[i];
      float* crow = c + static_cast<size_t>(i) * n;
#pragma omp simd
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(const float* a, const float* b, float* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const float* arow = a + static_cast<size_t>(i) * k;
    float* crow = c + static_cast<size_t>(i) * n;
    int j = 0;
    for (; j + 4 <= n; j += 4) {
      const float* b0 = b + static_cast<size_t>(j) * k;
      const float* b1 = b0 + k;
      const float* b2 = b1 + k;
      const float* b3 = b2 + k;
      float acc0 = 0.0f, acc1 = 0.0f, acc2 = 0.0f, acc3 = 0.0f;
#pragma omp simd reduction(+ : acc0, acc1, acc2, acc3)
      for (int x = 0; x < k; ++x) {
        const float av = arow[x];
        acc0 += av * b0[x];
        acc1 += av * b1[x];
        acc2 += av * b2[x];
        acc3 += av * b3[x];
      }
      crow[j] += acc0;
      crow[j + 1] += acc1;
      crow[j + 2] += acc2;
      crow[j + 3] += acc3;
    }
    for (; j < n; ++j) {
      const float* brow = b + static_cast<size_t>(j) * k;
      float acc = 0.0f;
#pragma omp simd reduction(+ : acc)
      for (int x = 0; x < k; ++x) acc += arow[x] * brow[x];
      crow[j] += acc;
    }
  }
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  std::vector<float> out(a.data());
  const auto& bv = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return Tensor::make_op("add", a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
    const auto& g = self.grad;
    for (int p = 0; p < 2; ++p) {
      Tensor& par = self.parents[static_cast<size_t>(p)];
      if (par.requires_grad()) accumulate(par.grad(), g);
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  std::vector<float> out(a.data());
  const auto& bv = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return Tensor::make_op("sub", a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
    const auto& g = self.grad;
    if (self.parents[0].requires_grad()) accumulate(self.parents[0].grad(), g);
    if (self.parents[1].requires_grad()) {
      auto& pg = self.parents[1].grad();
      for (size_t i = 0; i < pg.size(); ++i) pg[i] -= g[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  std::vector<float> out(a.data());
  const auto& bv = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return Tensor::make_op("mul", a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
    const auto& g = self.grad;
    const auto& av = self.parents[0].data();
    const auto& bv2 = self.parents[1].data();
    if (self.parents[0].requires_grad()) {
      auto& pg = self.parents[0].grad();
      for (size_t i = 0; i < pg.size(); ++i) pg[i] += g[i] * bv2[i];
    }
    if (self.parents[1].requires_grad()) {
      auto& pg = self.parents[1].grad();
      for (size_t i = 0; i < pg.size(); ++i) pg[i] += g[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, float s) {
  std::vector<float> out(a.data());
  for (auto& v : out) v *= s;
  return Tensor::make_op("scale", a.shape(), std::move(out), {a}, [s](TensorNode& self) {
    if (!self.parents[0].requires_grad()) return;
    auto& pg = self.parents[0].grad();
    const auto& g = self.grad;
    for (size_t i = 0; i < pg.size(); ++i) pg[i] += g[i] * s;
  });
}

Tensor relu(const Tensor& x) {
  std::vector<float> out(x.data());
  for (auto& v : out) v = v > 0.0f ? v : 0.0f;
  return Tensor::make_op("relu", x.shape(), std::move(out), {x}, [](TensorNode& self) {
    if (!self.parents[0].requires_grad()) return;
    const auto& xv = self.parents[0].data();
    auto& pg = self.parents[0].grad();
    const auto& g = self.grad;
    for (size_t i = 0; i < pg.size(); ++i) {
      if (xv[i] > 0.0f) pg[i] += g[i];
    }
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (bias.ndim() != 1 || x.ndim() < 1 || x.shape().back() != bias.dim(0)) {
    throw ShapeError("add_bias: input " + shape_str(x.shape()) + " incompatible with bias " +
                     shape_str(bias.shape()));
  }
  const int d = bias.dim(0);
  const int rows = x.size() / d;
  std::vector<float> out(x.data());
  const auto& bv = bias.data();
  for (int r = 0; r < rows; ++r) {
    float* row = out.data() + static_cast<size_t>(r) * d;
    for (int j = 0; j < d; ++j) row[j] += bv[static_cast<size_t>(j)];
  }
  return Tensor::make_op("add_bias", x.shape(), std::move(out), {x, bias},
                         [d, rows](TensorNode& self) {
                           const auto& g = self.grad;
                           if (self.parents[0].requires_grad()) {
                             accumulate(self.parents[0].grad(), g);
                           }
                           if (self.parents[1].requires_grad()) {
                             auto& bg = self.parents[1].grad();
                             for (int r = 0; r < rows; ++r) {
                               const float* grow = g.data() + static_cast<size_t>(r) * d;
                               for (int j = 0; j < d; ++j) bg[static_cast<size_t>(j)] += grow[j];
                             }
                           }
                         });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<float> out(static_cast<size_t>(m) * n, 0.0f);
  gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  return Tensor::make_op("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](TensorNode& self) {
    const auto& g = self.grad;
    const auto& av = self.parents[0].data();
    const auto& bv = self.parents[1].data();
    if (self.parents[0].requires_grad()) {
      gemm_nt(g.data(), bv.data(), self.parents[0].grad().data(), m, n, k);
    }
    if (self.parents[1].requires_grad()) {
      gemm_tn(av.data(), g.data(), self.parents[1].grad().data(), k, m, n);
    }
  });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1)) {
    throw ShapeError("bmm: incompatible shapes " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  const int batch = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  std::vector<float> out(static_cast<size_t>(batch) * m * n, 0.0f);
  for (int i = 0; i < batch; ++i) {
    gemm_nn(a.data().data() + static_cast<size_t>(i) * m * k,
            b.data().data() + static_cast<size_t>(i) * k * n,
            out.data() + static_cast<size_t>(i) * m * n, m, k, n);
  }
  return Tensor::make_op(
      "bmm", {batch, m, n}, std::move(out), {a, b}, [batch, m, k, n](TensorNode& self) {
        const auto& g = self.grad;
        const auto& av = self.parents[0].data();
        const auto& bv = self.parents[1].data();
        for (int i = 0; i < batch; ++i) {
          const float* gi = g.data() + static_cast<size_t>(i) * m * n;
          if (self.parents[0].requires_grad()) {
            gemm_nt(gi, bv.data() + static_cast<size_t>(i) * k * n,
                    self.parents[0].grad().data() + static_cast<size_t>(i) * m * k, m, n, k);
          }
          if (self.parents[1].requires_grad()) {
            gemm_tn(av.data() + static_cast<size_t>(i) * m * k, gi,
                    self.parents[1].grad().data() + static_cast<size_t>(i) * k * n, k, m, n);
          }
        }
      });
}

namespace {

void transpose_mn(const float* src, float* dst, int m, int n) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      dst[static_cast<size_t>(j) * m + i] = src[static_cast<size_t>(i) * n + j];
    }
  }
}

}  // namespace

Tensor transpose_last2(const Tensor& a) {
  if (a.ndim() < 2) throw ShapeError("transpose_last2: need rank >= 2, got " + shape_str(a.shape()));
  Shape s = a.shape();
  const int n = s.back();
  const int m = s[s.size() - 2];
  std::swap(s[s.size() - 2], s[s.size() - 1]);
  const int outer = a.size() / (m * n);
  std::vector<float> out(a.data().size());
  for (int o = 0; o < outer; ++o) {
    transpose_mn(a.data().data() + static_cast<size_t>(o) * m * n,
                 out.data() + static_cast<size_t>(o) * m * n, m, n);
  }
  return Tensor::make_op("transpose_last2", std::move(s), std::move(out), {a},
                         [m, n, outer](TensorNode& self) {
                           if (!self.parents[0].requires_grad()) return;
                           auto& pg = self.parents[0].grad();
                           std::vector<float> tmp(static_cast<size_t>(m) * n);
                           for (int o = 0; o < outer; ++o) {
                             transpose_mn(self.grad.data() + static_cast<size_t>(o) * m * n,
                                          tmp.data(), n, m);
                             float* dst = pg.data() + static_cast<size_t>(o) * m * n;
                             for (size_t i = 0; i < tmp.size(); ++i) dst[i] += tmp[i];
                           }
                         });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.ndim() != 2 || w.ndim() != 2 || x.dim(1) != w.dim(0)) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                     shape_str(w.shape()));
  }
  if (b.ndim() != 1 || b.dim(0) != w.dim(1)) {
    throw ShapeError("linear: bias " + shape_str(b.shape()) + " incompatible with weight " +
                     shape_str(w.shape()));
  }
  const int rows = x.dim(0), in = x.dim(1), out_dim = w.dim(1);
  std::vector<float> out(static_cast<size_t>(rows) * out_dim);
  const auto& bv = b.data();
  for (int r = 0; r < rows; ++r) {
    std::memcpy(out.data() + static_cast<size_t>(r) * out_dim, bv.data(),
                sizeof(float) * static_cast<size_t>(out_dim));
  }
  gemm_nn(x.data().data(), w.data().data(), out.data(), rows, in, out_dim);
  return Tensor::make_op(
      "linear", {rows, out_dim}, std::move(out), {x, w, b},
      [rows, in, out_dim](TensorNode& self) {
        const auto& g = self.grad;
        const auto& xv = self.parents[0].data();
        const auto& wv = self.parents[1].data();
        if (self.parents[0].requires_grad()) {
          gemm_nt(g.data(), wv.data(), self.parents[0].grad().data(), rows, out_dim, in);
        }
        if (self.parents[1].requires_grad()) {
          gemm_tn(xv.data(), g.data(), self.parents[1].grad().data(), in, rows, out_dim);
        }
        if (self.parents[2].requires_grad()) {
          auto& bg = self.parents[2].grad();
          for (int r = 0; r < rows; ++r) {
            const float* grow = g.data() + static_cast<size_t>(r) * out_dim;
            for (int j = 0; j < out_dim; ++j) bg[static_cast<size_t>(j)] += grow[j];
          }
        }
      });
}

namespace {

struct ConvDims {
  int batch, ci, h, w, co, kh, kw, ho, wo, kdim, nsp;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int stride, int pad) {
  if (x.ndim() != 4 || w.ndim() != 4) {
    throw ShapeError("conv2d: input " + shape_str(x.shape()) + " weight " + shape_str(w.shape()) +
                     " must both be rank 4");
  }
  if (x.dim(1) != w.dim(1)) {
    throw ShapeError("conv2d: channel mismatch, input " + shape_str(x.shape()) + " weight " +
                     shape_str(w.shape()));
  }
  ConvDims d;
  d.batch = x.dim(0);
  d.ci = x.dim(1);
  d.h = x.dim(2);
  d.w = x.dim(3);
  d.co = w.dim(0);
  d.kh = w.dim(2);
  d.kw = w.dim(3);
  d.ho = (d.h + 2 * pad - d.kh) / stride + 1;
  d.wo = (d.w + 2 * pad - d.kw) / stride + 1;
  if (d.ho <= 0 || d.wo <= 0) {
    throw ShapeError("conv2d: kernel " + shape_str(w.shape()) + " too large for input " +
                     shape_str(x.shape()));
  }
  d.kdim = d.ci * d.kh * d.kw;
  d.nsp = d.ho * d.wo;
  return d;
}

void im2col(const float* img, float* col, const ConvDims& d, int stride, int pad) {
  for (int c = 0; c < d.ci; ++c) {
    const float* chan = img + static_cast<size_t>(c) * d.h * d.w;
    for (int ki = 0; ki < d.kh; ++ki) {
      for (int kj = 0; kj < d.kw; ++kj) {
        float* crow = col + static_cast<size_t>((c * d.kh + ki) * d.kw + kj) * d.nsp;
        for (int oi = 0; oi < d.ho; ++oi) {
          const int si = oi * stride - pad + ki;
          float* dst = crow + static_cast<size_t>(oi) * d.wo;
          if (si < 0 || si >= d.h) {
            std::memset(dst, 0, sizeof(float) * static_cast<size_t>(d.wo));
            continue;
          }
          const float* srow = chan + static_cast<size_t>(si) * d.w;
          for (int oj = 0; oj < d.wo; ++oj) {
            const int sj = oj * stride - pad + kj;
            dst[oj] = (sj >= 0 && sj < d.w) ? srow[sj] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im_accum(const float* col, float* img, const ConvDims& d, int stride, int pad) {
  for (int c = 0; c < d.ci; ++c) {
    float* chan = img + static_cast<size_t>(c) * d.h * d.w;
    for (int ki = 0; ki < d.kh; ++ki) {
      for (int kj = 0; kj < d.kw; ++kj) {
        const float* crow = col + static_cast<size_t>((c * d.kh + ki) * d.kw + kj) * d.nsp;
        for (int oi = 0; oi < d.ho; ++oi) {
          const int si = oi * stride - pad + ki;
          if (si < 0 || si >= d.h) continue;
          float* srow = chan + static_cast<size_t>(si) * d.w;
          const float* src = crow + static_cast<size_t>(oi) * d.wo;
          for (int oj = 0; oj < d.wo; ++oj) {
            const int sj = oj * stride - pad + kj;
            if (sj >= 0 && sj < d.w) srow[sj] += src[oj];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  const ConvDims d = conv_dims(x, w, stride, pad);
  if (b.ndim() != 1 || b.dim(0) != d.co) {
    throw ShapeError("conv2d: bias " + shape_str(b.shape()) + " incompatible with weight " +
                     shape_str(w.shape()));
  }
  // Columns are cached for the backward pass; released with the graph.
  auto cols = std::make_shared<std::vector<float>>(
      static_cast<size_t>(d.batch) * d.kdim * d.nsp);
  std::vector<float> out(static_cast<size_t>(d.batch) * d.co * d.nsp);
  const auto& bv = b.data();
  for (int i = 0; i < d.batch; ++i) {
    float* col = cols->data() + static_cast<size_t>(i) * d.kdim * d.nsp;
    im2col(x.data().data() + static_cast<size_t>(i) * d.ci * d.h * d.w, col, d, stride, pad);
    float* oi = out.data() + static_cast<size_t>(i) * d.co * d.nsp;
    for (int c = 0; c < d.co; ++c) {
      std::fill(oi + static_cast<size_t>(c) * d.nsp, oi + static_cast<size_t>(c + 1) * d.nsp,
                bv[static_cast<size_t>(c)]);
    }
    gemm_nn(w.data().data(), col, oi, d.co, d.kdim, d.nsp);
  }
  return Tensor::make_op(
      "conv2d", {d.batch, d.co, d.ho, d.wo}, std::move(out), {x, w, b},
      [d, stride, pad, cols](TensorNode& self) {
        const auto& g = self.grad;
        const auto& wv = self.parents[1].data();
        const bool need_dx = self.parents[0].requires_grad();
        const bool need_dw = self.parents[1].requires_grad();
        const bool need_db = self.parents[2].requires_grad();
        std::vector<float> dcol;
        if (need_dx) dcol.resize(static_cast<size_t>(d.kdim) * d.nsp);
        for (int i = 0; i < d.batch; ++i) {
          const float* gi = g.data() + static_cast<size_t>(i) * d.co * d.nsp;
          const float* col = cols->data() + static_cast<size_t>(i) * d.kdim * d.nsp;
          if (need_dw) {
            gemm_nt(gi, col, self.parents[1].grad().data(), d.co, d.nsp, d.kdim);
          }
          if (need_db) {
            auto& bg = self.parents[2].grad();
            for (int c = 0; c < d.co; ++c) {
              const float* grow = gi + static_cast<size_t>(c) * d.nsp;
              float acc = 0.0f;
              for (int j = 0; j < d.nsp; ++j) acc += grow[j];
              bg[static_cast<size_t>(c)] += acc;
            }
          }
          if (need_dx) {
            std::fill(dcol.begin(), dcol.end(), 0.0f);
            gemm_tn(wv.data(), gi, dcol.data(), d.kdim, d.co, d.nsp);
            col2im_accum(dcol.data(),
                         self.parents[0].grad().data() + static_cast<size_t>(i) * d.ci * d.h * d.w,
                         d, stride, pad);
          }
        }
      });
}

Tensor softmax(const Tensor& x) {
  if (x.ndim() < 1) throw ShapeError("softmax: rank must be >= 1");
  const int d = x.shape().back();
  const int rows = x.size() / d;
  std::vector<float> out(x.data().size());
  for (int r = 0; r < rows; ++r) {
    const float* src = x.data().data() + static_cast<size_t>(r) * d;
    float* dst = out.data() + static_cast<size_t>(r) * d;
    float mx = src[0];
    for (int j = 1; j < d; ++j) mx = std::max(mx, src[j]);
    float sum = 0.0f;
    for (int j = 0; j < d; ++j) {
      dst[j] = std::exp(src[j] - mx);
      sum += dst[j];
    }
    const float inv = 1.0f / sum;
    for (int j = 0; j < d; ++j) dst[j] *= inv;
  }
  return Tensor::make_op("softmax", x.shape(), std::move(out), {x}, [d, rows](TensorNode& self) {
    if (!self.parents[0].requires_grad()) return;
    auto& pg = self.parents[0].grad();
    for (int r = 0; r < rows; ++r) {
      const float* y = self.value.data() + static_cast<size_t>(r) * d;
      const float* gy = self.grad.data() + static_cast<size_t>(r) * d;
      float dot = 0.0f;
      for (int j = 0; j < d; ++j) dot += y[j] * gy[j];
      float* dst = pg.data() + static_cast<size_t>(r) * d;
      for (int j = 0; j < d; ++j) dst[j] += y[j] * (gy[j] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, float eps) {
  const int d = x.shape().back();
  if (gain.ndim() != 1 || gain.dim(0) != d || bias.ndim() != 1 || bias.dim(0) != d) {
    throw ShapeError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" +
                     shape_str(bias.shape()) + " incompatible with input " + shape_str(x.shape()));
  }
  const int rows = x.size() / d;
  std::vector<float> out(x.data().size());
  auto xhat = std::make_shared<std::vector<float>>(x.data().size());
  auto inv_std = std::make_shared<std::vector<float>>(static_cast<size_t>(rows));
  const auto& gv = gain.data();
  const auto& bv = bias.data();
  for (int r = 0; r < rows; ++r) {
    const float* src = x.data().data() + static_cast<size_t>(r) * d;
    float mean = 0.0f;
    for (int j = 0; j < d; ++j) mean += src[j];
    mean /= static_cast<float>(d);
    float var = 0.0f;
    for (int j = 0; j < d; ++j) {
      const float c = src[j] - mean;
      var += c * c;
    }
    var /= static_cast<float>(d);
    const float is = 1.0f / std::sqrt(var + eps);
    (*inv_std)[static_cast<size_t>(r)] = is;
    float* xh = xhat->data() + static_cast<size_t>(r) * d;
    float* dst = out.data() + static_cast<size_t>(r) * d;
    for (int j = 0; j < d; ++j) {
      xh[j] = (src[j] - mean) * is;
      dst[j] = gv[static_cast<size_t>(j)] * xh[j] + bv[static_cast<size_t>(j)];
    }
  }
  return Tensor::make_op(
      "layer_norm", x.shape(), std::move(out), {x, gain, bias},
      [d, rows, xhat, inv_std](TensorNode& self) {
        const auto& g = self.grad;
        const auto& gv = self.parents[1].data();
        for (int r = 0; r < rows; ++r) {
          const float* gy = g.data() + static_cast<size_t>(r) * d;
          const float* xh = xhat->data() + static_cast<size_t>(r) * d;
          if (self.parents[1].requires_grad()) {
            auto& gg = self.parents[1].grad();
            for (int j = 0; j < d; ++j) gg[static_cast<size_t>(j)] += gy[j] * xh[j];
          }
          if (self.parents[2].requires_grad()) {
            auto& bg = self.parents[2].grad();
            for (int j = 0; j < d; ++j) bg[static_cast<size_t>(j)] += gy[j];
          }
          if (self.parents[0].requires_grad()) {
            float m1 = 0.0f, m2 = 0.0f;
            for (int j = 0; j < d; ++j) {
              const float dxh = gy[j] * gv[static_cast<size_t>(j)];
              m1 += dxh;
              m2 += dxh * xh[j];
            }
            m1 /= static_cast<float>(d);
            m2 /= static_cast<float>(d);
            const float is = (*inv_std)[static_cast<size_t>(r)];
            float* dst = self.parents[0].grad().data() + static_cast<size_t>(r) * d;
            for (int j = 0; j < d; ++j) {
              const float dxh = gy[j] * gv[static_cast<size_t>(j)];
              dst[j] += is * (dxh - m1 - xh[j] * m2);
            }
          }
        }
      });
}

Tensor reduce_max(const Tensor& x, int axis) {
  const AxisView v = axis_view("reduce_max", x.shape(), axis);
  std::vector<float> out(static_cast<size_t>(v.outer) * v.inner);
  auto argmax = std::make_shared<std::vector<int>>(out.size());
  for (int o = 0; o < v.outer; ++o) {
    for (int in = 0; in < v.inner; ++in) {
      const size_t base = (static_cast<size_t>(o) * v.axis) * v.inner + in;
      float best = x.data()[base];
      int best_k = 0;
      for (int k = 1; k < v.axis; ++k) {
        const float val = x.data()[base + static_cast<size_t>(k) * v.inner];
        if (val > best) {
          best = val;
          best_k = k;
        }
      }
      const size_t oi = static_cast<size_t>(o) * v.inner + in;
      out[oi] = best;
      (*argmax)[oi] = best_k;
    }
  }
  return Tensor::make_op("reduce_max", drop_axis(x.shape(), axis), std::move(out), {x},
                         [v, argmax](TensorNode& self) {
                           if (!self.parents[0].requires_grad()) return;
                           auto& pg = self.parents[0].grad();
                           for (int o = 0; o < v.outer; ++o) {
                             for (int in = 0; in < v.inner; ++in) {
                               const size_t oi = static_cast<size_t>(o) * v.inner + in;
                               const int k = (*argmax)[oi];
                               pg[(static_cast<size_t>(o) * v.axis + k) * v.inner + in] +=
                                   self.grad[oi];
                             }
                           }
                         });
}

Tensor reduce_mean(const Tensor& x, int axis) {
  const AxisView v = axis_view("reduce_mean", x.shape(), axis);
  std::vector<float> out(static_cast<size_t>(v.outer) * v.inner, 0.0f);
  for (int o = 0; o < v.outer; ++o) {
    for (int k = 0; k < v.axis; ++k) {
      const float* src = x.data().data() + (static_cast<size_t>(o) * v.axis + k) * v.inner;
      float* dst = out.data() + static_cast<size_t>(o) * v.inner;
      for (int in = 0; in < v.inner; ++in) dst[in] += src[in];
    }
  }
  const float inv = 1.0f / static_cast<float>(v.axis);
  for (auto& val : out) val *= inv;
  return Tensor::make_op("reduce_mean", drop_axis(x.shape(), axis), std::move(out), {x},
                         [v, inv](TensorNode& self) {
                           if (!self.parents[0].requires_grad()) return;
                           auto& pg = self.parents[0].grad();
                           for (int o = 0; o < v.outer; ++o) {
                             for (int k = 0; k < v.axis; ++k) {
                               float* dst = pg.data() + (static_cast<size_t>(o) * v.axis + k) * v.inner;
                               const float* src = self.grad.data() + static_cast<size_t>(o) * v.inner;
                               for (int in = 0; in < v.inner; ++in) dst[in] += src[in] * inv;
                             }
                           }
                         });
}

Tensor mean_all(const Tensor& x) {
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  const float inv = 1.0f / static_cast<float>(x.size());
  std::vector<float> out{static_cast<float>(acc) * inv};
  return Tensor::make_op("mean_all", {1}, std::move(out), {x}, [inv](TensorNode& self) {
    if (!self.parents[0].requires_grad()) return;
    auto& pg = self.parents[0].grad();
    const float g = self.grad[0] * inv;
    for (auto& v : pg) v += g;
  });
}

Tensor sum_all(const Tensor& x) {
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  std::vector<float> out{static_cast<float>(acc)};
  return Tensor::make_op("sum_all", {1}, std::move(out), {x}, [](TensorNode& self) {
    if (!self.parents[0].requires_grad()) return;
    auto& pg = self.parents[0].grad();
    const float g = self.grad[0];
    for (auto& v : pg) v += g;
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<float> out(x.data());
  return Tensor::make_op("reshape", std::move(shape), std::move(out), {x}, [](TensorNode& self) {
    if (!self.parents[0].requires_grad()) return;
    accumulate(self.parents[0].grad(), self.grad);
  });
}

Tensor concat(const std::vector<Tensor>& xs, int axis) {
  if (xs.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = xs[0].shape();
  for (const auto& t : xs) {
    if (t.ndim() != static_cast<int>(first.size())) {
      throw ShapeError("concat: rank mismatch " + shape_str(first) + " vs " + shape_str(t.shape()));
    }
    for (int i = 0; i < t.ndim(); ++i) {
      if (i != axis && t.dim(i) != first[static_cast<size_t>(i)]) {
        throw ShapeError("concat: shape mismatch " + shape_str(first) + " vs " +
                         shape_str(t.shape()) + " on axis " + std::to_string(i));
      }
    }
  }
  Shape out_shape = first;
  int total_axis = 0;
  for (const auto& t : xs) total_axis += t.dim(axis);
  out_shape[static_cast<size_t>(axis)] = total_axis;
  const AxisView v = axis_view("concat", out_shape, axis);
  std::vector<float> out(static_cast<size_t>(numel(out_shape)));
  std::vector<int> axis_sizes;
  axis_sizes.reserve(xs.size());
  for (const auto& t : xs) axis_sizes.push_back(t.dim(axis));
  int offset = 0;
  for (size_t ti = 0; ti < xs.size(); ++ti) {
    const int a = axis_sizes[ti];
    const auto& src = xs[ti].data();
    for (int o = 0; o < v.outer; ++o) {
      std::memcpy(out.data() + (static_cast<size_t>(o) * v.axis + offset) * v.inner,
                  src.data() + static_cast<size_t>(o) * a * v.inner,
                  sizeof(float) * static_cast<size_t>(a) * v.inner);
    }
    offset += a;
  }
  return Tensor::make_op("concat", std::move(out_shape), std::move(out), xs,
                         [v, axis_sizes](TensorNode& self) {
                           int off = 0;
                           for (size_t ti = 0; ti < self.parents.size(); ++ti) {
                             const int a = axis_sizes[ti];
                             if (self.parents[ti].requires_grad()) {
                               auto& pg = self.parents[ti].grad();
                               for (int o = 0; o < v.outer; ++o) {
                                 const float* src =
                                     self.grad.data() +
                                     (static_cast<size_t>(o) * v.axis + off) * v.inner;
                                 float* dst = pg.data() + static_cast<size_t>(o) * a * v.inner;
                                 for (size_t i = 0; i < static_cast<size_t>(a) * v.inner; ++i) {
                                   dst[i] += src[i];
                                 }
                               }
                             }
                             off += a;
                           }
                         });
}

Tensor slice_last(const Tensor& x, int start, int len) {
  const int d = x.shape().back();
  if (start < 0 || len < 1 || start + len > d) {
    throw ShapeError("slice_last: range [" + std::to_string(start) + "," +
                     std::to_string(start + len) + ") out of bounds for " + shape_str(x.shape()));
  }
  const int rows = x.size() / d;
  Shape out_shape = x.shape();
  out_shape.back() = len;
  std::vector<float> out(static_cast<size_t>(rows) * len);
  for (int r = 0; r < rows; ++r) {
    std::memcpy(out.data() + static_cast<size_t>(r) * len,
                x.data().data() + static_cast<size_t>(r) * d + start,
                sizeof(float) * static_cast<size_t>(len));
  }
  return Tensor::make_op("slice_last", std::move(out_shape), std::move(out), {x},
                         [d, rows, start, len](TensorNode& self) {
                           if (!self.parents[0].requires_grad()) return;
                           auto& pg = self.parents[0].grad();
                           for (int r = 0; r < rows; ++r) {
                             const float* src = self.grad.data() + static_cast<size_t>(r) * len;
                             float* dst = pg.data() + static_cast<size_t>(r) * d + start;
                             for (int j = 0; j < len; ++j) dst[j] += src[j];
                           }
                         });
}

Tensor scatter_rows(const Tensor& x, const std::vector<int>& row_index, int rows) {
  if (x.ndim() != 2) throw ShapeError("scatter_rows: input must be rank 2");
  if (static_cast<int>(row_index.size()) != x.dim(0)) {
    throw ShapeError("scatter_rows: index count " + std::to_string(row_index.size()) +
                     " does not match input rows " + std::to_string(x.dim(0)));
  }
  const int d = x.dim(1);
  std::vector<float> out(static_cast<size_t>(rows) * d, 0.0f);
  for (size_t i = 0; i < row_index.size(); ++i) {
    const int r = row_index[i];
    if (r < 0 || r >= rows) throw ShapeError("scatter_rows: row index out of range");
    std::memcpy(out.data() + static_cast<size_t>(r) * d, x.data().data() + i * d,
                sizeof(float) * static_cast<size_t>(d));
  }
  return Tensor::make_op("scatter_rows", {rows, d}, std::move(out), {x},
                         [row_index, d](TensorNode& self) {
                           if (!self.parents[0].requires_grad()) return;
                           auto& pg = self.parents[0].grad();
                           for (size_t i = 0; i < row_index.size(); ++i) {
                             const float* src =
                                 self.grad.data() + static_cast<size_t>(row_index[i]) * d;
                             float* dst = pg.data() + i * d;
                             for (int j = 0; j < d; ++j) dst[j] += src[j];
                           }
                         });
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (q.ndim() == 2) {
    Tensor q3 = reshape(q, {1, q.dim(0), q.dim(1)});
    Tensor k3 = reshape(k, {1, k.dim(0), k.dim(1)});
    Tensor v3 = reshape(v, {1, v.dim(0), v.dim(1)});
    Tensor out = scaled_dot_attention(q3, k3, v3);
    return reshape(out, {out.dim(1), out.dim(2)});
  }
  if (q.ndim() != 3 || k.ndim() != 3 || v.ndim() != 3) {
    throw ShapeError("scaled_dot_attention: expected rank 2 or 3 inputs, got " +
                     shape_str(q.shape()));
  }
  const float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(q.shape().back()));
  Tensor scores = scale(bmm(q, transpose_last2(k)), inv_sqrt_d);
  Tensor attn = softmax(scores);
  return bmm(attn, v);
}

}  // namespace vgdp::nn
