#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cost/tensor.hpp"

namespace cost {

// Differentiable primitives. Binary elementwise ops follow numpy broadcasting.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);

Tensor neg(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor square(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
/// Values outside [lo, hi] are clamped; their gradient is zero.
Tensor clamp(const Tensor& x, double lo, double hi);

/// Standard matrix product of [m x k] and [k x n].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor sum(const Tensor& x, std::size_t axis, bool keepdim = false);
Tensor mean(const Tensor& x, std::size_t axis, bool keepdim = false);

/// Max-subtracted softmax along `axis`.
Tensor softmax(const Tensor& x, std::size_t axis);
/// log(sum(exp(x))) along `axis`; entries equal to -inf are ignored.
Tensor logsumexp(const Tensor& x, std::size_t axis, bool keepdim = false);

/// Normalizes over the last axis, then applies gamma * x_hat + beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
/// Gathers rows (first-axis slices) by index; duplicates accumulate on backward.
Tensor index_rows(const Tensor& x, std::span<const std::size_t> rows);

/// 2-D convolution of a single [C_in x H x W] map with weight
/// [C_out x C_in x k x k] and bias [C_out].
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding);

/// Spatial center crop of a [C x H x W] map to [C x side x side].
Tensor center_crop(const Tensor& input, std::size_t side);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator+(double s, const Tensor& a) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return add_scalar(a, -s); }
inline Tensor operator-(double s, const Tensor& a) { return add_scalar(neg(a), s); }
inline Tensor operator*(const Tensor& a, double s) { return mul_scalar(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return mul_scalar(a, s); }
inline Tensor operator/(const Tensor& a, double s) { return mul_scalar(a, 1.0 / s); }

}  // namespace cost
