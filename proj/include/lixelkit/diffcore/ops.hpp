#pragma once

#include <span>
#include <vector>

#include "lixelkit/diffcore/tensor.hpp"

namespace lixelkit::diff {

/// Denominators with magnitude below this are clamped (sign preserved) by
/// `div`; norms below it are treated as zero by `l2_norm`/`sqrt` backward.
inline constexpr double kDivEpsilon = 1e-12;
/// `exp` saturates its argument here so finite inputs stay finite.
inline constexpr double kExpMaxArg = 700.0;

// Elementwise arithmetic with numpy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return add_scalar(a, -s); }
inline Tensor operator*(const Tensor& a, double s) { return mul_scalar(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return mul_scalar(a, s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

Tensor exp(const Tensor& x);
Tensor abs(const Tensor& x);
/// Negative inputs are an error; the derivative at 0 is reported as 0.
Tensor sqrt(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sin(const Tensor& x);
Tensor cos(const Tensor& x);

/// [m,k]x[k,n], [B,m,k]x[B,k,n], and either 3-D operand against a 2-D one.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Fully connected layer: x [N,in], weight [out,in], optional bias [out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = {});

Tensor sum(const Tensor& x, int axis, bool keepdim = false);
Tensor mean(const Tensor& x, int axis, bool keepdim = false);
/// Subgradient flows to the first maximal element.
Tensor max(const Tensor& x, int axis, bool keepdim = false);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

Tensor softmax(const Tensor& x, int axis);
/// Euclidean norm along `axis`. Gradient is zero where the norm < kDivEpsilon.
Tensor l2_norm(const Tensor& x, int axis, bool keepdim = false);

Tensor concat(std::span<const Tensor> parts, int axis);
Tensor concat(std::initializer_list<Tensor> parts, int axis);
/// Stacks equally shaped tensors along a new axis.
Tensor stack(std::span<const Tensor> parts, int axis);
Tensor reshape(const Tensor& x, Shape shape);
/// Contiguous sub-range [start, start+length) along `axis`.
Tensor narrow(const Tensor& x, int axis, std::size_t start, std::size_t length);

/// Resolves a possibly negative axis against `rank`.
std::size_t normalize_axis(int axis, std::size_t rank, const char* op);

}  // namespace lixelkit::diff
