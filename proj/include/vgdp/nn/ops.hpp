#pragma once

#include <vector>

#include "vgdp/nn/tensor.hpp"

namespace vgdp::nn {

// Raw GEMM kernels (row-major, accumulate into C). Exposed for benchmarks.
void gemm_nn(const float* a, const float* b, float* c, int m, int k, int n);  // C += A B
void gemm_tn(const float* a, const float* b, float* c, int m, int k, int n);  // C += Aᵀ B, A is [k,m]
void gemm_nt(const float* a, const float* b, float* c, int m, int k, int n);  // C += A Bᵀ, B is [n,k]

// Elementwise / broadcast.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);
Tensor relu(const Tensor& x);

// x [..., d] + bias [d].
Tensor add_bias(const Tensor& x, const Tensor& bias);

// Linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);                              // [m,k]x[k,n]
Tensor bmm(const Tensor& a, const Tensor& b);                                 // [b,m,k]x[b,k,n]
Tensor transpose_last2(const Tensor& a);
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);             // x[r,in] w[in,out] b[out]

// conv2d over NCHW input, weight [co,ci,kh,kw], per-channel bias.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);

// Normalization and reductions.
Tensor softmax(const Tensor& x);                                              // last axis
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, float eps = 1e-5f);
Tensor reduce_max(const Tensor& x, int axis);   // ties keep the lowest index
Tensor reduce_mean(const Tensor& x, int axis);
Tensor mean_all(const Tensor& x);
Tensor sum_all(const Tensor& x);

// Structure.
Tensor reshape(const Tensor& x, Shape shape);
Tensor concat(const std::vector<Tensor>& xs, int axis);
Tensor slice_last(const Tensor& x, int start, int len);
// Rows of x land at row_index[i] of a zero [rows, d] output.
Tensor scatter_rows(const Tensor& x, const std::vector<int>& row_index, int rows);

// softmax(q kᵀ / sqrt(d)) v over the last two axes; accepts [t,d] or [b,t,d].
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v);

}  // namespace vgdp::nn
