#include "lixelkit/diffcore/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lixelkit/diffcore/graph.hpp"

namespace lixelkit::diff {

namespace {

void check_eps(double eps) {
    if (!(eps >= 1e-7 && eps <= 1e-3)) throw Error("grad_check: eps " + std::to_string(eps) + " outside [1e-7, 1e-3]");
}

double finite_scalar(const Tensor& t) {
    if (t.numel() != 1) throw ShapeError("grad_check: function must return a scalar, got " + to_string(t.shape()));
    const double v = t.item();
    if (!std::isfinite(v)) throw Error("grad_check: function value is not finite");
    return v;
}

}  // namespace

double relative_error(double analytic, double numeric) {
    const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
    return std::abs(analytic - numeric) / scale;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
    check_eps(eps);
    const std::vector<double> x0 = x.to_vector();
    Tensor leaf = Tensor::from(x.shape(), x0, true);
    Tensor out = f(leaf);
    finite_scalar(out);
    backward(out);
    std::vector<double> analytic(x0.size(), 0.0);
    if (leaf.has_grad()) {
        auto g = leaf.grad();
        analytic.assign(g.begin(), g.end());
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < x0.size(); ++i) {
        auto xp = x0, xm = x0;
        xp[i] += eps;
        xm[i] -= eps;
        const double fp = finite_scalar(f(Tensor::from(x.shape(), xp)));
        const double fm = finite_scalar(f(Tensor::from(x.shape(), xm)));
        worst = std::max(worst, relative_error(analytic[i], (fp - fm) / (2.0 * eps)));
    }
    return worst;
}

double grad_check_probes(const std::function<Tensor()>& loss, std::span<Probe> probes, double eps) {
    check_eps(eps);
    for (auto& p : probes) p.leaf.zero_grad();
    Tensor out = loss();
    finite_scalar(out);
    backward(out);
    std::vector<double> analytic;
    analytic.reserve(probes.size());
    for (auto& p : probes) analytic.push_back(p.leaf.has_grad() ? p.leaf.grad()[p.index] : 0.0);

    double worst = 0.0;
    for (std::size_t k = 0; k < probes.size(); ++k) {
        auto data = probes[k].leaf.mutable_data();
        const double orig = data[probes[k].index];
        data[probes[k].index] = orig + eps;
        const double fp = finite_scalar(loss());
        data[probes[k].index] = orig - eps;
        const double fm = finite_scalar(loss());
        data[probes[k].index] = orig;
        worst = std::max(worst, relative_error(analytic[k], (fp - fm) / (2.0 * eps)));
    }
    return worst;
}

}  // namespace lixelkit::diff
