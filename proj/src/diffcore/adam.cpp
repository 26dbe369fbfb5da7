#include "lixelkit/diffcore/adam.hpp"

#include <cmath>
#include <string>

namespace lixelkit::diff {

void adam_step(std::span<Parameter> params, AdamState& state) {
    if (state.first_moment.empty() && state.second_moment.empty()) {
        for (const auto& p : params) {
            state.first_moment.emplace_back(p.value.numel(), 0.0);
            state.second_moment.emplace_back(p.value.numel(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
        throw ShapeError("adam: state tracks " + std::to_string(state.first_moment.size()) + " parameters, got " +
                         std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& p = params[i];
        if (state.first_moment[i].size() != p.value.numel() || state.second_moment[i].size() != p.value.numel()) {
            throw ShapeError("adam: moment size mismatch for parameter '" + p.name + "'");
        }
        if (!p.value.has_grad()) continue;
        for (double g : p.value.grad()) {
            if (!std::isfinite(g)) throw Error("adam: non-finite gradient in parameter '" + p.name + "'");
        }
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        auto w = p.value.mutable_data();
        const bool has = p.value.has_grad();
        std::span<const double> g = has ? p.value.grad() : std::span<const double>{};
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double gk = has ? g[k] : 0.0;
            m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * gk;
            v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * gk * gk;
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            w[k] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

}  // namespace lixelkit::diff
