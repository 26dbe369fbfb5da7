#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lixelkit/diffcore/params.hpp"

namespace lixelkit::diff {

struct AdamState {
    std::uint64_t step = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One bias-corrected Adam update of every parameter from its accumulated
/// gradient (absent gradients count as zero). Moments are allocated on the
/// first call. A non-finite gradient aborts before anything is modified.
void adam_step(std::span<Parameter> params, AdamState& state);

}  // namespace lixelkit::diff
