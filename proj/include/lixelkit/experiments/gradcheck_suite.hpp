#pragma once

#include <functional>
#include <string>
#include <vector>

namespace lixelkit::exp {

struct GradCheckCase {
    std::string name;
    std::uint64_t seed = 0;
    double max_error = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckCase> cases;

    double worst() const;
    bool passed(double tolerance = 1e-4) const { return worst() < tolerance; }
    /// Largest error per case name across seeds, in first-run order.
    std::vector<GradCheckCase> per_name() const;
};

/// Finite-difference checks of every differentiable op, loss, heatmap and
/// camera transform, the template kinematics and the full network forward
/// in all three cascade modes, each repeated for `seeds` random draws.
GradCheckReport run_gradcheck_suite(std::size_t seeds = 10,
                                    const std::function<void(const GradCheckCase&)>& on_case = {});

}  // namespace lixelkit::exp
