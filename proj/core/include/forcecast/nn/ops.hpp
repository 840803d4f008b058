#pragma once

#include <vector>

#include "forcecast/nn/tensor.hpp"

namespace forcecast::nn {

// Elementwise binary ops accept equal shapes, or `b` matching the trailing dims of `a`
// (broadcast over the leading dims), e.g. a bias or a position table.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);

/// a [..., K] x b [K, N] -> [..., N]
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// a [B, M, K] x b [B, K, N] -> [B, M, N]; with transpose_b, b is [B, N, K].
template <typename T> Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool transpose_b = false);

template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> tanh(const Tensor<T>& x);
/// Exact (erf) GELU.
template <typename T> Tensor<T> gelu(const Tensor<T>& x);
template <typename T> Tensor<T> abs(const Tensor<T>& x);
template <typename T> Tensor<T> square(const Tensor<T>& x);
/// Softmax over the last dimension.
template <typename T> Tensor<T> softmax(const Tensor<T>& x);

template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);

/// One dimension may be -1.
template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T> Tensor<T> permute(const Tensor<T>& x, const std::vector<int>& order);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);
/// Half-open [begin, end) along `axis`.
template <typename T> Tensor<T> slice(const Tensor<T>& x, int axis, int begin, int end);

/// x [B, C, H, W], weight [O, C, k, k], optional bias [O]; zero padding.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, int stride, int padding);
/// Non-overlapping k x k average pooling; H and W must be divisible by k.
template <typename T> Tensor<T> avg_pool2d(const Tensor<T>& x, int k);
/// [B, C, H, W] -> [B, C]
template <typename T> Tensor<T> global_avg_pool(const Tensor<T>& x);

/// Channel axis 1 of [N, C] or [N, C, ...]. In training, batch statistics are used
/// and the running buffers are updated in place; otherwise the buffers are used.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, Tensor<T>& running_mean,
                     Tensor<T>& running_var, bool training, T momentum = T(0.1), T eps = T(1e-5));
/// Normalizes the last dimension.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps = T(1e-5));

}  // namespace forcecast::nn
