#include "lixelkit/diffcore/conv.hpp"

#include <Eigen/Core>
#include <string>

#include "lixelkit/diffcore/ops.hpp"

namespace lixelkit::diff {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

// Sliding-window geometry from a [C,H,W] image to an [*,Ho,Wo] response.
struct Window {
    std::size_t c, h, w, kh, kw, sh, sw, ph, pw, ho, wo;
    std::size_t rows() const { return c * kh * kw; }
    std::size_t cols() const { return ho * wo; }
};

void im2col(const double* img, const Window& g, double* col) {
    std::size_t r = 0;
    for (std::size_t c = 0; c < g.c; ++c)
        for (std::size_t ki = 0; ki < g.kh; ++ki)
            for (std::size_t kj = 0; kj < g.kw; ++kj, ++r) {
                double* row = col + r * g.cols();
                for (std::size_t oy = 0; oy < g.ho; ++oy) {
                    const long iy = static_cast<long>(oy * g.sh + ki) - static_cast<long>(g.ph);
                    double* dst = row + oy * g.wo;
                    if (iy < 0 || iy >= static_cast<long>(g.h)) {
                        std::fill_n(dst, g.wo, 0.0);
                        continue;
                    }
                    const double* src = img + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
                    for (std::size_t ox = 0; ox < g.wo; ++ox) {
                        const long ix = static_cast<long>(ox * g.sw + kj) - static_cast<long>(g.pw);
                        dst[ox] = (ix < 0 || ix >= static_cast<long>(g.w)) ? 0.0 : src[ix];
                    }
                }
            }
}

void col2im(const double* col, const Window& g, double* img) {
    std::size_t r = 0;
    for (std::size_t c = 0; c < g.c; ++c)
        for (std::size_t ki = 0; ki < g.kh; ++ki)
            for (std::size_t kj = 0; kj < g.kw; ++kj, ++r) {
                const double* row = col + r * g.cols();
                for (std::size_t oy = 0; oy < g.ho; ++oy) {
                    const long iy = static_cast<long>(oy * g.sh + ki) - static_cast<long>(g.ph);
                    if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
                    double* dst = img + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
                    const double* src = row + oy * g.wo;
                    for (std::size_t ox = 0; ox < g.wo; ++ox) {
                        const long ix = static_cast<long>(ox * g.sw + kj) - static_cast<long>(g.pw);
                        if (ix >= 0 && ix < static_cast<long>(g.w)) dst[ix] += src[ox];
                    }
                }
            }
}

void check_bias(const char* op, const Tensor& bias, std::size_t channels) {
    if (bias.defined() && bias.numel() != channels) {
        throw ShapeError(std::string(op) + ": bias " + to_string(bias.shape()) + " does not match " +
                         std::to_string(channels) + " output channels");
    }
}

void add_bias(std::vector<double>& out, const Tensor& bias, std::size_t n, std::size_t channels, std::size_t plane) {
    if (!bias.defined()) return;
    const auto b = bias.data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < channels; ++c) {
            double* p = out.data() + (i * channels + c) * plane;
            for (std::size_t k = 0; k < plane; ++k) p[k] += b[c];
        }
}

void accumulate_bias_grad(Node& self, std::size_t index, std::size_t n, std::size_t channels, std::size_t plane) {
    if (self.inputs.size() <= index) return;
    auto gb = input_grad(self, index);
    if (gb.empty()) return;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < channels; ++c) {
            const double* g = self.grad.data() + (i * channels + c) * plane;
            double s = 0.0;
            for (std::size_t k = 0; k < plane; ++k) s += g[k];
            gb[c] += s;
        }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, Conv2dOptions opt) {
    if (x.dim() != 4 || weight.dim() != 4 || x.shape()[1] != weight.shape()[1]) {
        throw ShapeError("conv2d: input " + to_string(x.shape()) + " incompatible with weight " +
                         to_string(weight.shape()));
    }
    if (opt.stride_h == 0 || opt.stride_w == 0) throw ShapeError("conv2d: zero stride");
    const std::size_t n = x.shape()[0], outc = weight.shape()[0];
    Window g{x.shape()[1], x.shape()[2], x.shape()[3], weight.shape()[2], weight.shape()[3], opt.stride_h,
             opt.stride_w, opt.pad_h, opt.pad_w, 0, 0};
    if (g.h + 2 * g.ph < g.kh || g.w + 2 * g.pw < g.kw) {
        throw ShapeError("conv2d: kernel " + to_string(weight.shape()) + " larger than padded input " +
                         to_string(x.shape()));
    }
    g.ho = (g.h + 2 * g.ph - g.kh) / g.sh + 1;
    g.wo = (g.w + 2 * g.pw - g.kw) / g.sw + 1;
    check_bias("conv2d", bias, outc);

    const std::size_t in_plane = g.c * g.h * g.w, out_plane = outc * g.cols();
    std::vector<double> out(n * out_plane);
    std::vector<double> col(g.rows() * g.cols());
    CMapMat Wm(weight.data().data(), outc, g.rows());
    for (std::size_t i = 0; i < n; ++i) {
        im2col(x.data().data() + i * in_plane, g, col.data());
        MapMat(out.data() + i * out_plane, outc, g.cols()).noalias() = Wm * CMapMat(col.data(), g.rows(), g.cols());
    }
    add_bias(out, bias, n, outc, g.cols());

    std::vector<Tensor> inputs{x, weight};
    if (bias.defined()) inputs.push_back(bias);
    return make_result("conv2d", {n, outc, g.ho, g.wo}, std::move(out), std::move(inputs), [=](Node& self) {
        auto gx = input_grad(self, 0);
        auto gw = input_grad(self, 1);
        const double* xv = self.inputs[0]->value.data();
        CMapMat Wm(self.inputs[1]->value.data(), outc, g.rows());
        std::vector<double> col(g.rows() * g.cols());
        for (std::size_t i = 0; i < n; ++i) {
            CMapMat G(self.grad.data() + i * out_plane, outc, g.cols());
            if (!gw.empty()) {
                im2col(xv + i * in_plane, g, col.data());
                MapMat(gw.data(), outc, g.rows()).noalias() += G * CMapMat(col.data(), g.rows(), g.cols()).transpose();
            }
            if (!gx.empty()) {
                MapMat(col.data(), g.rows(), g.cols()).noalias() = Wm.transpose() * G;
                col2im(col.data(), g, gx.data() + i * in_plane);
            }
        }
        accumulate_bias_grad(self, 2, n, outc, g.cols());
    });
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& weight, const Tensor& bias, Conv2dOptions opt) {
    if (x.dim() != 4 || weight.dim() != 4 || x.shape()[1] != weight.shape()[0]) {
        throw ShapeError("conv_transpose2d: input " + to_string(x.shape()) + " incompatible with weight " +
                         to_string(weight.shape()));
    }
    if (opt.stride_h == 0 || opt.stride_w == 0) throw ShapeError("conv_transpose2d: zero stride");
    const std::size_t n = x.shape()[0], inc = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
    const std::size_t outc = weight.shape()[1], kh = weight.shape()[2], kw = weight.shape()[3];
    const long ho_l = static_cast<long>((h - 1) * opt.stride_h + kh) - 2 * static_cast<long>(opt.pad_h);
    const long wo_l = static_cast<long>((w - 1) * opt.stride_w + kw) - 2 * static_cast<long>(opt.pad_w);
    if (ho_l <= 0 || wo_l <= 0) {
        throw ShapeError("conv_transpose2d: padding leaves no output for input " + to_string(x.shape()));
    }
    check_bias("conv_transpose2d", bias, outc);
    // Window maps the (large) output image onto the (small) input grid.
    const Window g{outc, static_cast<std::size_t>(ho_l), static_cast<std::size_t>(wo_l), kh, kw, opt.stride_h,
                   opt.stride_w, opt.pad_h, opt.pad_w, h, w};
    const std::size_t in_plane = inc * h * w, out_plane = outc * g.h * g.w;
    std::vector<double> out(n * out_plane, 0.0);
    std::vector<double> col(g.rows() * g.cols());
    CMapMat Wm(weight.data().data(), inc, g.rows());
    for (std::size_t i = 0; i < n; ++i) {
        MapMat(col.data(), g.rows(), g.cols()).noalias() =
            Wm.transpose() * CMapMat(x.data().data() + i * in_plane, inc, h * w);
        col2im(col.data(), g, out.data() + i * out_plane);
    }
    add_bias(out, bias, n, outc, g.h * g.w);

    std::vector<Tensor> inputs{x, weight};
    if (bias.defined()) inputs.push_back(bias);
    return make_result("conv_transpose2d", {n, outc, g.h, g.w}, std::move(out), std::move(inputs), [=](Node& self) {
        auto gx = input_grad(self, 0);
        auto gw = input_grad(self, 1);
        const double* xv = self.inputs[0]->value.data();
        CMapMat Wm(self.inputs[1]->value.data(), inc, g.rows());
        std::vector<double> col(g.rows() * g.cols());
        for (std::size_t i = 0; i < n; ++i) {
            im2col(self.grad.data() + i * out_plane, g, col.data());
            CMapMat C(col.data(), g.rows(), g.cols());
            if (!gx.empty()) MapMat(gx.data() + i * in_plane, inc, h * w).noalias() += Wm * C;
            if (!gw.empty()) {
                MapMat(gw.data(), inc, g.rows()).noalias() += CMapMat(xv + i * in_plane, inc, h * w) * C.transpose();
            }
        }
        accumulate_bias_grad(self, 2, n, outc, g.h * g.w);
    });
}

namespace {

Tensor as_2d(const Tensor& t, const char* op) {
    if (t.dim() != 3) throw ShapeError(std::string(op) + ": expected rank 3, got " + to_string(t.shape()));
    return reshape(t, {t.shape()[0], t.shape()[1], 1, t.shape()[2]});
}

Tensor from_2d(const Tensor& t) { return reshape(t, {t.shape()[0], t.shape()[1], t.shape()[3]}); }

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride, std::size_t pad) {
    return from_2d(conv2d(as_2d(x, "conv1d"), as_2d(weight, "conv1d"), bias, {1, stride, 0, pad}));
}

Tensor conv_transpose1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
                        std::size_t pad) {
    return from_2d(conv_transpose2d(as_2d(x, "conv_transpose1d"), as_2d(weight, "conv_transpose1d"), bias,
                                    {1, stride, 0, pad}));
}

}  // namespace lixelkit::diff
