#pragma once

#include <cstddef>

#include "lixelkit/diffcore/tensor.hpp"

namespace lixelkit::diff {

struct Conv2dOptions {
    std::size_t stride_h = 1, stride_w = 1;
    std::size_t pad_h = 0, pad_w = 0;

    static Conv2dOptions uniform(std::size_t stride, std::size_t pad) { return {stride, stride, pad, pad}; }
};

/// Cross-correlation. x [N,C,H,W], weight [O,C,kh,kw], optional bias [O].
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias = {}, Conv2dOptions opt = {});

/// Adjoint of conv2d. x [N,C,H,W], weight [C,O,kh,kw], optional bias [O].
/// Output extent (H-1)*stride - 2*pad + kh along each axis.
Tensor conv_transpose2d(const Tensor& x, const Tensor& weight, const Tensor& bias = {}, Conv2dOptions opt = {});

/// 1-D variants over [N,C,L]; kernels are [O,C,k] and [C,O,k].
Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias = {}, std::size_t stride = 1,
              std::size_t pad = 0);
Tensor conv_transpose1d(const Tensor& x, const Tensor& weight, const Tensor& bias = {}, std::size_t stride = 1,
                        std::size_t pad = 0);

}  // namespace lixelkit::diff
