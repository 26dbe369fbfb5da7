#pragma once

#include "lixelkit/diffcore/tensor.hpp"

namespace lixelkit::diff {

/// Running statistics of one batch-norm layer. Updated in training mode as
/// running = (1 - momentum) * running + momentum * batch (unbiased variance).
struct BatchNormStats {
    Tensor running_mean;
    Tensor running_var;
    double momentum = 0.1;

    static BatchNormStats fresh(std::size_t channels, double momentum = 0.1);
};

inline constexpr double kBatchNormEpsilon = 1e-5;

/// Normalizes over every axis except axis 1 (channels): [N,C], [N,C,L] and
/// [N,C,H,W] inputs. Training mode needs N >= 2; eval mode uses the running
/// statistics and accepts N == 1.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats, bool training);

}  // namespace lixelkit::diff
