#pragma once

#include <vector>

#include "core/tensor.hpp"

namespace cdrn {

// Elementwise (same-shape operands; no broadcasting).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, real c);
Tensor add_scalar(const Tensor& x, real c);
Tensor clamp(const Tensor& x, real lo, real hi);

Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, real slope = real(0.2));
Tensor sigmoid(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor exp_op(const Tensor& x);
Tensor log_op(const Tensor& x);
Tensor sqrt_op(const Tensor& x);
Tensor pow_scalar(const Tensor& x, real p);

Tensor softmax_axis(const Tensor& x, int axis);

// Shape ops.
Tensor concat(const std::vector<Tensor>& parts, int axis);
std::vector<Tensor> split(const Tensor& x, int axis, int parts);
Tensor narrow(const Tensor& x, int axis, int start, int length);
Tensor reshape(const Tensor& x, Shape shape);

// Reductions (scalar outputs, double accumulation).
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mse(const Tensor& a, const Tensor& b);

// NCHW image ops.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);
Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride = 2);
Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                     real eps = real(1e-5));
Tensor global_avg_pool(const Tensor& x);
Tensor upsample_nearest2(const Tensor& x);

// x[N,K] * w[M,K]^T + b[M] -> [N,M]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// Per-sample per-channel rescale: y[n,c,h,w] = x[n,c,h,w] * s[n,c].
Tensor scale_channels(const Tensor& x, const Tensor& s);

// Multiply by a single-element tensor (a learnable scalar).
Tensor scale_by(const Tensor& x, const Tensor& s);

// Depthwise valid-mode correlation with one fixed kh x kw kernel shared by
// every channel. No gradient flows to the kernel.
Tensor filter2d_depthwise_valid(const Tensor& x, const Tensor& kernel);

}  // namespace cdrn
