#pragma once

#include <functional>
#include <span>
#include <vector>

#include "lixelkit/diffcore/tensor.hpp"

namespace lixelkit::diff {

/// Per-element error measure shared by every gradient check:
/// |analytic - numeric| / max(1, |analytic|, |numeric|).
double relative_error(double analytic, double numeric);

/// Compares reverse-mode gradients of the scalar `f` at `x` with central
/// differences of step `eps` (must lie in [1e-7, 1e-3]). Returns the maximum
/// relative error over all elements of `x`.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps = 1e-6);

/// One probed scalar: element `index` of `leaf`.
struct Probe {
    Tensor leaf;
    std::size_t index;
};

/// Same comparison for a closure over existing leaves (e.g. network
/// parameters). Each probed element is perturbed in place and restored.
/// `loss` is re-evaluated from scratch for every perturbation.
double grad_check_probes(const std::function<Tensor()>& loss, std::span<Probe> probes, double eps = 1e-6);

}  // namespace lixelkit::diff
