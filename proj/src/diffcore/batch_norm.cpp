#include "lixelkit/diffcore/batch_norm.hpp"

#include <cmath>
#include <string>

namespace lixelkit::diff {

BatchNormStats BatchNormStats::fresh(std::size_t channels, double momentum) {
    return {Tensor::zeros({channels}), Tensor::full({channels}, 1.0), momentum};
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats, bool training) {
    if (x.dim() < 2) throw ShapeError("batch_norm: input " + to_string(x.shape()) + " has no channel axis");
    const std::size_t n = x.shape()[0], ch = x.shape()[1];
    std::size_t plane = 1;
    for (std::size_t d = 2; d < x.dim(); ++d) plane *= x.shape()[d];
    if (gamma.numel() != ch || beta.numel() != ch || stats.running_mean.numel() != ch) {
        throw ShapeError("batch_norm: " + std::to_string(ch) + " channels in " + to_string(x.shape()) +
                         " but affine parameters have " + std::to_string(gamma.numel()));
    }
    if (training && n < 2) throw Error("batch_norm: training mode needs a batch of at least 2, got 1");

    const auto xv = x.data();
    const std::size_t count = n * plane;
    std::vector<double> mu(ch), inv_std(ch);
    if (training) {
        auto rm = stats.running_mean.mutable_data();
        auto rv = stats.running_var.mutable_data();
        for (std::size_t c = 0; c < ch; ++c) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t k = 0; k < plane; ++k) s += xv[(i * ch + c) * plane + k];
            const double m = s / static_cast<double>(count);
            double ss = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t k = 0; k < plane; ++k) {
                    const double d = xv[(i * ch + c) * plane + k] - m;
                    ss += d * d;
                }
            const double var = ss / static_cast<double>(count);
            mu[c] = m;
            inv_std[c] = 1.0 / std::sqrt(var + kBatchNormEpsilon);
            const double unbiased = ss / static_cast<double>(count - 1);
            rm[c] = (1.0 - stats.momentum) * rm[c] + stats.momentum * m;
            rv[c] = (1.0 - stats.momentum) * rv[c] + stats.momentum * unbiased;
        }
    } else {
        const auto rm = stats.running_mean.data();
        const auto rv = stats.running_var.data();
        for (std::size_t c = 0; c < ch; ++c) {
            mu[c] = rm[c];
            inv_std[c] = 1.0 / std::sqrt(rv[c] + kBatchNormEpsilon);
        }
    }

    const auto gv = gamma.data();
    const auto bv = beta.data();
    std::vector<double> xhat(xv.size()), out(xv.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < ch; ++c)
            for (std::size_t k = 0; k < plane; ++k) {
                const std::size_t idx = (i * ch + c) * plane + k;
                xhat[idx] = (xv[idx] - mu[c]) * inv_std[c];
                out[idx] = gv[c] * xhat[idx] + bv[c];
            }

    return make_result(
        training ? "batch_norm_train" : "batch_norm_eval", x.shape(), std::move(out), {x, gamma, beta},
        [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
            auto gx = input_grad(self, 0);
            auto gg = input_grad(self, 1);
            auto gb = input_grad(self, 2);
            const auto& gamma_v = self.inputs[1]->value;
            const auto& g = self.grad;
            for (std::size_t c = 0; c < ch; ++c) {
                double sum_g = 0.0, sum_gx = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t k = 0; k < plane; ++k) {
                        const std::size_t idx = (i * ch + c) * plane + k;
                        sum_g += g[idx];
                        sum_gx += g[idx] * xhat[idx];
                    }
                if (!gg.empty()) gg[c] += sum_gx;
                if (!gb.empty()) gb[c] += sum_g;
                if (gx.empty()) continue;
                const double scale = gamma_v[c] * inv_std[c];
                if (training) {
                    const double mg = sum_g / static_cast<double>(count);
                    const double mgx = sum_gx / static_cast<double>(count);
                    for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t k = 0; k < plane; ++k) {
                            const std::size_t idx = (i * ch + c) * plane + k;
                            gx[idx] += scale * (g[idx] - mg - xhat[idx] * mgx);
                        }
                } else {
                    for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t k = 0; k < plane; ++k) {
                            const std::size_t idx = (i * ch + c) * plane + k;
                            gx[idx] += scale * g[idx];
                        }
                }
            }
        });
}

}  // namespace lixelkit::diff
