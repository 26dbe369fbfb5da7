#include "lixelkit/diffcore/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace lixelkit::diff {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

std::size_t normalize_axis(int axis, std::size_t rank, const char* op) {
    const int r = static_cast<int>(rank);
    const int a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r) {
        throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(rank));
    }
    return static_cast<std::size_t>(a);
}

namespace {

struct AxisSplit {
    std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
    AxisSplit r;
    for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
    r.n = s[axis];
    for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
    return r;
}

// ---------------------------------------------------------------------------
// Broadcasting
// ---------------------------------------------------------------------------

struct Broadcast {
    Shape out;
    std::vector<std::size_t> stride_a, stride_b;
    enum class Kind { same, b_scalar, a_scalar, general } kind = Kind::general;
};

std::vector<std::size_t> aligned_strides(const Shape& s, std::size_t rank) {
    std::vector<std::size_t> st(rank, 0);
    std::size_t acc = 1;
    const std::size_t off = rank - s.size();
    for (std::size_t i = s.size(); i-- > 0;) {
        st[off + i] = s[i] == 1 ? 0 : acc;
        acc *= s[i];
    }
    return st;
}

Broadcast plan_broadcast(const Shape& a, const Shape& b, const char* op) {
    Broadcast p;
    if (a == b) {
        p.out = a;
        p.kind = Broadcast::Kind::same;
        return p;
    }
    const std::size_t rank = std::max(a.size(), b.size());
    p.out.assign(rank, 1);
    for (std::size_t i = 0; i < rank; ++i) {
        const std::size_t ea = i + a.size() >= rank ? a[i + a.size() - rank] : 1;
        const std::size_t eb = i + b.size() >= rank ? b[i + b.size() - rank] : 1;
        if (ea != eb && ea != 1 && eb != 1) {
            throw ShapeError(std::string(op) + ": cannot broadcast " + to_string(a) + " with " + to_string(b));
        }
        p.out[i] = std::max(ea, eb);
    }
    if (numel(b) == 1) {
        p.kind = Broadcast::Kind::b_scalar;
    } else if (numel(a) == 1) {
        p.kind = Broadcast::Kind::a_scalar;
    } else {
        p.stride_a = aligned_strides(a, rank);
        p.stride_b = aligned_strides(b, rank);
    }
    return p;
}

// Calls f(out_index, a_index, b_index) for every output element.
template <class F>
void for_each_broadcast(const Broadcast& p, F&& f) {
    const std::size_t total = numel(p.out);
    switch (p.kind) {
        case Broadcast::Kind::same:
            for (std::size_t i = 0; i < total; ++i) f(i, i, i);
            return;
        case Broadcast::Kind::b_scalar:
            for (std::size_t i = 0; i < total; ++i) f(i, i, 0);
            return;
        case Broadcast::Kind::a_scalar:
            for (std::size_t i = 0; i < total; ++i) f(i, 0, i);
            return;
        case Broadcast::Kind::general:
            break;
    }
    const std::size_t rank = p.out.size();
    std::vector<std::size_t> idx(rank, 0);
    std::size_t ia = 0, ib = 0;
    for (std::size_t i = 0; i < total; ++i) {
        f(i, ia, ib);
        for (std::size_t d = rank; d-- > 0;) {
            if (++idx[d] < p.out[d]) {
                ia += p.stride_a[d];
                ib += p.stride_b[d];
                break;
            }
            ia -= p.stride_a[d] * (p.out[d] - 1);
            ib -= p.stride_b[d] * (p.out[d] - 1);
            idx[d] = 0;
        }
    }
}

// Value and partial derivatives of a binary op.
template <class Fwd, class Da, class Db>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, Fwd fwd, Da da, Db db) {
    auto plan = plan_broadcast(a.shape(), b.shape(), op);
    std::vector<double> out(numel(plan.out));
    const auto av = a.data();
    const auto bv = b.data();
    for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) { out[i] = fwd(av[ia], bv[ib]); });
    Shape shape = plan.out;
    return make_result(op, std::move(shape), std::move(out), {a, b},
                       [plan = std::move(plan), da, db](Node& self) {
                           const auto& av = self.inputs[0]->value;
                           const auto& bv = self.inputs[1]->value;
                           auto ga = input_grad(self, 0);
                           auto gb = input_grad(self, 1);
                           const auto& g = self.grad;
                           for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) {
                               if (!ga.empty()) ga[ia] += g[i] * da(av[ia], bv[ib]);
                               if (!gb.empty()) gb[ib] += g[i] * db(av[ia], bv[ib]);
                           });
                       });
}

template <class Fwd, class Deriv>
Tensor unary(const char* op, const Tensor& x, Fwd fwd, Deriv deriv) {
    const auto xv = x.data();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
    return make_result(op, x.shape(), std::move(out), {x}, [deriv](Node& self) {
        auto gx = input_grad(self, 0);
        const auto& xv = self.inputs[0]->value;
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * deriv(xv[i], self.value[i]);
    });
}

double clamp_denominator(double b) {
    if (std::abs(b) >= kDivEpsilon) return b;
    return b < 0.0 ? -kDivEpsilon : kDivEpsilon;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary(
        "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary(
        "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary(
        "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary(
        "div", a, b, [](double x, double y) { return x / clamp_denominator(y); },
        [](double, double y) { return 1.0 / clamp_denominator(y); },
        [](double x, double y) {
            const double c = clamp_denominator(y);
            return std::abs(y) < kDivEpsilon ? 0.0 : -x / (c * c);
        });
}

Tensor add_scalar(const Tensor& a, double s) {
    return unary("add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double s) {
    return unary("mul_scalar", a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor exp(const Tensor& x) {
    return unary(
        "exp", x, [](double v) { return std::exp(std::min(v, kExpMaxArg)); },
        [](double v, double y) { return v > kExpMaxArg ? 0.0 : y; });
}

Tensor abs(const Tensor& x) {
    return unary(
        "abs", x, [](double v) { return std::abs(v); },
        [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor sqrt(const Tensor& x) {
    for (double v : x.data()) {
        if (v < 0.0) throw Error("sqrt: negative input " + std::to_string(v));
    }
    return unary(
        "sqrt", x, [](double v) { return std::sqrt(v); },
        [](double, double y) { return y < kDivEpsilon ? 0.0 : 0.5 / y; });
}

Tensor relu(const Tensor& x) {
    return unary(
        "relu", x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sin(const Tensor& x) {
    return unary("sin", x, [](double v) { return std::sin(v); }, [](double v, double) { return std::cos(v); });
}

Tensor cos(const Tensor& x) {
    return unary("cos", x, [](double v) { return std::cos(v); }, [](double v, double) { return -std::sin(v); });
}

// ---------------------------------------------------------------------------
// Matrix products
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    const bool a3 = sa.size() == 3, b3 = sb.size() == 3;
    if ((sa.size() != 2 && !a3) || (sb.size() != 2 && !b3)) {
        throw ShapeError("matmul: operands must be 2-D or 3-D, got " + to_string(sa) + " and " + to_string(sb));
    }
    const std::size_t m = sa[sa.size() - 2], k = sa.back();
    const std::size_t kb = sb[sb.size() - 2], n = sb.back();
    std::size_t batch = 1;
    if (a3 && b3 && sa[0] != sb[0]) {
        throw ShapeError("matmul: batch extents differ, " + to_string(sa) + " vs " + to_string(sb));
    }
    if (a3) batch = sa[0];
    if (b3) batch = sb[0];
    if (k != kb) throw ShapeError("matmul: inner extents differ, " + to_string(sa) + " vs " + to_string(sb));

    const std::size_t a_step = a3 ? m * k : 0;
    const std::size_t b_step = b3 ? k * n : 0;
    std::vector<double> out(batch * m * n);
    for (std::size_t i = 0; i < batch; ++i) {
        CMapMat A(a.data().data() + i * a_step, m, k);
        CMapMat B(b.data().data() + i * b_step, k, n);
        MapMat C(out.data() + i * m * n, m, n);
        C.noalias() = A * B;
    }
    Shape shape = (a3 || b3) ? Shape{batch, m, n} : Shape{m, n};
    return make_result("matmul", std::move(shape), std::move(out), {a, b},
                       [=](Node& self) {
                           auto ga = input_grad(self, 0);
                           auto gb = input_grad(self, 1);
                           const double* av = self.inputs[0]->value.data();
                           const double* bv = self.inputs[1]->value.data();
                           for (std::size_t i = 0; i < batch; ++i) {
                               CMapMat G(self.grad.data() + i * m * n, m, n);
                               if (!ga.empty()) {
                                   MapMat GA(ga.data() + i * a_step, m, k);
                                   GA.noalias() += G * CMapMat(bv + i * b_step, k, n).transpose();
                               }
                               if (!gb.empty()) {
                                   MapMat GB(gb.data() + i * b_step, k, n);
                                   GB.noalias() += CMapMat(av + i * a_step, m, k).transpose() * G;
                               }
                           }
                       });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (x.dim() != 2 || weight.dim() != 2 || x.shape()[1] != weight.shape()[1]) {
        throw ShapeError("linear: input " + to_string(x.shape()) + " incompatible with weight " +
                         to_string(weight.shape()));
    }
    const std::size_t n = x.shape()[0], in = x.shape()[1], outd = weight.shape()[0];
    const bool has_bias = bias.defined();
    if (has_bias && (bias.numel() != outd)) {
        throw ShapeError("linear: bias " + to_string(bias.shape()) + " does not match " + std::to_string(outd) +
                         " outputs");
    }
    std::vector<double> out(n * outd);
    {
        MapMat Y(out.data(), n, outd);
        Y.noalias() = CMapMat(x.data().data(), n, in) * CMapMat(weight.data().data(), outd, in).transpose();
        if (has_bias) {
            Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.data().data(), outd);
        }
    }
    std::vector<Tensor> inputs{x, weight};
    if (has_bias) inputs.push_back(bias);
    return make_result("linear", {n, outd}, std::move(out), std::move(inputs), [=](Node& self) {
        CMapMat G(self.grad.data(), n, outd);
        auto gx = input_grad(self, 0);
        auto gw = input_grad(self, 1);
        if (!gx.empty()) {
            MapMat(gx.data(), n, in).noalias() += G * CMapMat(self.inputs[1]->value.data(), outd, in);
        }
        if (!gw.empty()) {
            MapMat(gw.data(), outd, in).noalias() += G.transpose() * CMapMat(self.inputs[0]->value.data(), n, in);
        }
        if (has_bias) {
            auto gb = input_grad(self, 2);
            if (!gb.empty()) Eigen::Map<Eigen::RowVectorXd>(gb.data(), outd) += G.colwise().sum();
        }
    });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

namespace {

Shape reduced_shape(const Shape& s, std::size_t axis, bool keepdim) {
    Shape r = s;
    if (keepdim) {
        r[axis] = 1;
    } else {
        r.erase(r.begin() + static_cast<std::ptrdiff_t>(axis));
        if (r.empty()) r.push_back(1);
    }
    return r;
}

Tensor sum_scaled(const char* op, const Tensor& x, int axis, bool keepdim, double scale) {
    const std::size_t ax = normalize_axis(axis, x.dim(), op);
    const auto sp = split_at(x.shape(), ax);
    const auto xv = x.data();
    std::vector<double> out(sp.outer * sp.inner, 0.0);
    for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t i = 0; i < sp.n; ++i)
            for (std::size_t in = 0; in < sp.inner; ++in) out[o * sp.inner + in] += xv[(o * sp.n + i) * sp.inner + in];
    for (auto& v : out) v *= scale;
    return make_result(op, reduced_shape(x.shape(), ax, keepdim), std::move(out), {x}, [sp, scale](Node& self) {
        auto gx = input_grad(self, 0);
        for (std::size_t o = 0; o < sp.outer; ++o)
            for (std::size_t i = 0; i < sp.n; ++i)
                for (std::size_t in = 0; in < sp.inner; ++in)
                    gx[(o * sp.n + i) * sp.inner + in] += scale * self.grad[o * sp.inner + in];
    });
}

}  // namespace

Tensor sum(const Tensor& x, int axis, bool keepdim) { return sum_scaled("sum", x, axis, keepdim, 1.0); }

Tensor mean(const Tensor& x, int axis, bool keepdim) {
    const std::size_t ax = normalize_axis(axis, x.dim(), "mean");
    return sum_scaled("mean", x, axis, keepdim, 1.0 / static_cast<double>(x.shape()[ax]));
}

Tensor max(const Tensor& x, int axis, bool keepdim) {
    const std::size_t ax = normalize_axis(axis, x.dim(), "max");
    const auto sp = split_at(x.shape(), ax);
    const auto xv = x.data();
    std::vector<double> out(sp.outer * sp.inner);
    std::vector<std::size_t> arg(out.size());
    for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t in = 0; in < sp.inner; ++in) {
            std::size_t best = 0;
            double bv = xv[o * sp.n * sp.inner + in];
            for (std::size_t i = 1; i < sp.n; ++i) {
                const double v = xv[(o * sp.n + i) * sp.inner + in];
                if (v > bv) {
                    bv = v;
                    best = i;
                }
            }
            out[o * sp.inner + in] = bv;
            arg[o * sp.inner + in] = (o * sp.n + best) * sp.inner + in;
        }
    return make_result("max", reduced_shape(x.shape(), ax, keepdim), std::move(out), {x},
                       [arg = std::move(arg)](Node& self) {
                           auto gx = input_grad(self, 0);
                           for (std::size_t i = 0; i < arg.size(); ++i) gx[arg[i]] += self.grad[i];
                       });
}

Tensor sum_all(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    return make_result("sum_all", {1}, {s}, {x}, [](Node& self) {
        auto gx = input_grad(self, 0);
        for (auto& g : gx) g += self.grad[0];
    });
}

Tensor mean_all(const Tensor& x) { return mul_scalar(sum_all(x), 1.0 / static_cast<double>(x.numel())); }

Tensor softmax(const Tensor& x, int axis) {
    const std::size_t ax = normalize_axis(axis, x.dim(), "softmax");
    const auto sp = split_at(x.shape(), ax);
    const auto xv = x.data();
    std::vector<double> out(xv.size());
    for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t in = 0; in < sp.inner; ++in) {
            const std::size_t base = o * sp.n * sp.inner + in;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < sp.n; ++i) mx = std::max(mx, xv[base + i * sp.inner]);
            double z = 0.0;
            for (std::size_t i = 0; i < sp.n; ++i) {
                const double e = std::exp(xv[base + i * sp.inner] - mx);
                out[base + i * sp.inner] = e;
                z += e;
            }
            for (std::size_t i = 0; i < sp.n; ++i) out[base + i * sp.inner] /= z;
        }
    return make_result("softmax", x.shape(), std::move(out), {x}, [sp](Node& self) {
        auto gx = input_grad(self, 0);
        const auto& y = self.value;
        const auto& g = self.grad;
        for (std::size_t o = 0; o < sp.outer; ++o)
            for (std::size_t in = 0; in < sp.inner; ++in) {
                const std::size_t base = o * sp.n * sp.inner + in;
                double dot = 0.0;
                for (std::size_t i = 0; i < sp.n; ++i) dot += g[base + i * sp.inner] * y[base + i * sp.inner];
                for (std::size_t i = 0; i < sp.n; ++i) {
                    const std::size_t k = base + i * sp.inner;
                    gx[k] += y[k] * (g[k] - dot);
                }
            }
    });
}

Tensor l2_norm(const Tensor& x, int axis, bool keepdim) {
    const std::size_t ax = normalize_axis(axis, x.dim(), "l2_norm");
    const auto sp = split_at(x.shape(), ax);
    const auto xv = x.data();
    std::vector<double> out(sp.outer * sp.inner, 0.0);
    for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t i = 0; i < sp.n; ++i)
            for (std::size_t in = 0; in < sp.inner; ++in) {
                const double v = xv[(o * sp.n + i) * sp.inner + in];
                out[o * sp.inner + in] += v * v;
            }
    for (auto& v : out) v = std::sqrt(v);
    return make_result("l2_norm", reduced_shape(x.shape(), ax, keepdim), std::move(out), {x}, [sp](Node& self) {
        auto gx = input_grad(self, 0);
        const auto& xv = self.inputs[0]->value;
        for (std::size_t o = 0; o < sp.outer; ++o)
            for (std::size_t in = 0; in < sp.inner; ++in) {
                const double nrm = self.value[o * sp.inner + in];
                if (nrm < kDivEpsilon) continue;
                const double g = self.grad[o * sp.inner + in] / nrm;
                for (std::size_t i = 0; i < sp.n; ++i) {
                    const std::size_t k = (o * sp.n + i) * sp.inner + in;
                    gx[k] += g * xv[k];
                }
            }
    });
}

// ---------------------------------------------------------------------------
// Shape manipulation
// ---------------------------------------------------------------------------

Tensor concat(std::span<const Tensor> parts, int axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape& s0 = parts[0].shape();
    const std::size_t ax = normalize_axis(axis, s0.size(), "concat");
    Shape out_shape = s0;
    out_shape[ax] = 0;
    std::vector<std::size_t> extents;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        bool ok = s.size() == s0.size();
        for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == ax || s[d] == s0[d];
        if (!ok) throw ShapeError("concat: " + to_string(s) + " incompatible with " + to_string(s0));
        extents.push_back(s[ax]);
        out_shape[ax] += s[ax];
    }
    const auto sp = split_at(out_shape, ax);
    std::vector<double> out(numel(out_shape));
    std::size_t offset = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        const auto v = parts[p].data();
        const std::size_t chunk = extents[p] * sp.inner;
        for (std::size_t o = 0; o < sp.outer; ++o)
            std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(o * chunk), chunk,
                        out.begin() + static_cast<std::ptrdiff_t>(o * sp.n * sp.inner + offset * sp.inner));
        offset += extents[p];
    }
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    return make_result("concat", std::move(out_shape), std::move(out), std::move(inputs),
                       [sp, extents = std::move(extents)](Node& self) {
                           std::size_t offset = 0;
                           for (std::size_t p = 0; p < extents.size(); ++p) {
                               auto g = input_grad(self, p);
                               const std::size_t chunk = extents[p] * sp.inner;
                               if (!g.empty()) {
                                   for (std::size_t o = 0; o < sp.outer; ++o)
                                       for (std::size_t i = 0; i < chunk; ++i)
                                           g[o * chunk + i] += self.grad[o * sp.n * sp.inner + offset * sp.inner + i];
                               }
                               offset += extents[p];
                           }
                       });
}

Tensor concat(std::initializer_list<Tensor> parts, int axis) {
    return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor stack(std::span<const Tensor> parts, int axis) {
    if (parts.empty()) throw ShapeError("stack: no inputs");
    const Shape& s0 = parts[0].shape();
    const std::size_t ax = normalize_axis(axis, s0.size() + 1, "stack");
    std::vector<Tensor> expanded;
    expanded.reserve(parts.size());
    for (const auto& p : parts) {
        if (p.shape() != s0) throw ShapeError("stack: " + to_string(p.shape()) + " differs from " + to_string(s0));
        Shape s = s0;
        s.insert(s.begin() + static_cast<std::ptrdiff_t>(ax), 1);
        expanded.push_back(reshape(p, std::move(s)));
    }
    return concat(expanded, static_cast<int>(ax));
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (numel(shape) != x.numel()) {
        throw ShapeError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
    }
    return make_result("reshape", std::move(shape), x.to_vector(), {x}, [](Node& self) {
        auto gx = input_grad(self, 0);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
    });
}

Tensor narrow(const Tensor& x, int axis, std::size_t start, std::size_t length) {
    const std::size_t ax = normalize_axis(axis, x.dim(), "narrow");
    const auto sp = split_at(x.shape(), ax);
    if (length == 0 || start + length > sp.n) {
        throw ShapeError("narrow: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") exceeds extent " + std::to_string(sp.n) + " of " + to_string(x.shape()));
    }
    Shape out_shape = x.shape();
    out_shape[ax] = length;
    const auto xv = x.data();
    std::vector<double> out(sp.outer * length * sp.inner);
    for (std::size_t o = 0; o < sp.outer; ++o)
        std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>((o * sp.n + start) * sp.inner), length * sp.inner,
                    out.begin() + static_cast<std::ptrdiff_t>(o * length * sp.inner));
    return make_result("narrow", std::move(out_shape), std::move(out), {x}, [sp, start, length](Node& self) {
        auto gx = input_grad(self, 0);
        for (std::size_t o = 0; o < sp.outer; ++o)
            for (std::size_t i = 0; i < length * sp.inner; ++i)
                gx[(o * sp.n + start) * sp.inner + i] += self.grad[o * length * sp.inner + i];
    });
}

}  // namespace lixelkit::diff
