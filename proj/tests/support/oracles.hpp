#pragma once

// Reference implementations used only by tests: slow, but independent of the
// library code they check.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "lixelkit/diffcore/rng.hpp"
#include "lixelkit/meshgeom/mesh.hpp"

namespace lixelkit::oracle {

using mesh::Vec3;
using diff::Rng;

using Mat3 = std::array<double, 9>;

// Rotation of a (not necessarily unit) quaternion.
inline Mat3 quat_rotation(const double* q) {
    const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    const double w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
    return {1 - 2 * (y * y + z * z), 2 * (x * y - z * w),     2 * (x * z + y * w),
            2 * (x * y + z * w),     1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
            2 * (x * z - y * w),     2 * (y * z + x * w),     1 - 2 * (x * x + y * y)};
}

inline Vec3 rotate(const Mat3& r, const Vec3& p) {
    return {r[0] * p[0] + r[1] * p[1] + r[2] * p[2], r[3] * p[0] + r[4] * p[1] + r[5] * p[2],
            r[6] * p[0] + r[7] * p[1] + r[8] * p[2]};
}

// Rotation of angle |w| about w / |w|.
inline Mat3 rotvec_rotation(const double* w) {
    const double th = std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]);
    if (th < 1e-300) return {1, 0, 0, 0, 1, 0, 0, 0, 1};
    const double q[4] = {std::cos(th / 2), std::sin(th / 2) * w[0] / th, std::sin(th / 2) * w[1] / th,
                         std::sin(th / 2) * w[2] / th};
    return quat_rotation(q);
}

// Least-squares similarity fit by direct search over rotations: for a fixed
// rotation the best scale and translation have closed forms.
inline double brute_force_pa(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt, Rng& rng) {
    const std::size_t n = pred.size();
    Vec3 mp{0, 0, 0}, mg{0, 0, 0};
    for (std::size_t i = 0; i < n; ++i)
        for (int k = 0; k < 3; ++k) {
            mp[k] += pred[i][k] / n;
            mg[k] += gt[i][k] / n;
        }
    auto fit = [&](const double* q, double* mean_dist) {
        const Mat3 r = rotvec_rotation(q);
        double num = 0.0, den = 0.0;
        std::vector<Vec3> rx(n);
        for (std::size_t i = 0; i < n; ++i) {
            rx[i] = rotate(r, {pred[i][0] - mp[0], pred[i][1] - mp[1], pred[i][2] - mp[2]});
            for (int k = 0; k < 3; ++k) {
                num += rx[i][k] * (gt[i][k] - mg[k]);
                den += rx[i][k] * rx[i][k];
            }
        }
        const double s = std::max(num / den, 0.0);
        double sq = 0.0, md = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d2 = 0.0;
            for (int k = 0; k < 3; ++k) {
                const double d = s * rx[i][k] - (gt[i][k] - mg[k]);
                d2 += d * d;
            }
            sq += d2;
            md += std::sqrt(d2);
        }
        if (mean_dist) *mean_dist = md / n;
        return sq;
    };

    // Nelder-Mead over rotation-vector components, restarted around the best vertex.
    auto nelder_mead = [&](std::array<double, 3> start, double step) {
        std::array<std::array<double, 3>, 4> s;
        std::array<double, 4> f;
        for (int i = 0; i < 4; ++i) {
            s[i] = start;
            if (i > 0) s[i][i - 1] += step;
            f[i] = fit(s[i].data(), nullptr);
        }
        for (int it = 0; it < 4000; ++it) {
            std::array<int, 4> ord;
            std::iota(ord.begin(), ord.end(), 0);
            std::sort(ord.begin(), ord.end(), [&](int a, int b) { return f[a] < f[b]; });
            auto s2 = s;
            auto f2 = f;
            for (int i = 0; i < 4; ++i) {
                s[i] = s2[ord[i]];
                f[i] = f2[ord[i]];
            }
            std::array<double, 3> c{0, 0, 0};
            for (int i = 0; i < 3; ++i)
                for (int k = 0; k < 3; ++k) c[k] += s[i][k] / 3.0;
            auto at = [&](double t) {
                std::array<double, 3> p;
                for (int k = 0; k < 3; ++k) p[k] = c[k] + t * (s[3][k] - c[k]);
                return p;
            };
            auto xr = at(-1.0);
            const double fr = fit(xr.data(), nullptr);
            if (fr < f[0]) {
                auto xe = at(-2.0);
                const double fe = fit(xe.data(), nullptr);
                if (fe < fr) s[3] = xe, f[3] = fe;
                else s[3] = xr, f[3] = fr;
            } else if (fr < f[2]) {
                s[3] = xr, f[3] = fr;
            } else {
                auto xc = at(0.5);
                const double fc = fit(xc.data(), nullptr);
                if (fc < f[3]) {
                    s[3] = xc, f[3] = fc;
                } else {
                    for (int i = 1; i < 4; ++i) {
                        for (int k = 0; k < 3; ++k) s[i][k] = s[0][k] + 0.5 * (s[i][k] - s[0][k]);
                        f[i] = fit(s[i].data(), nullptr);
                    }
                }
            }
        }
        int best = static_cast<int>(std::min_element(f.begin(), f.end()) - f.begin());
        return s[best];
    };

    std::array<double, 3> best{0, 0, 0};
    double best_f = fit(best.data(), nullptr);
    for (int t = 0; t < 64; ++t) {
        std::array<double, 3> q{rng.uniform(-M_PI, M_PI), rng.uniform(-M_PI, M_PI), rng.uniform(-M_PI, M_PI)};
        const double fq = fit(q.data(), nullptr);
        if (fq < best_f) best = q, best_f = fq;
    }
    for (double step : {0.5, 0.1, 0.01, 1e-3, 1e-4}) {
        best = nelder_mead(best, step);
    }
    double md = 0.0;
    fit(best.data(), &md);
    return md;
}

}  // namespace lixelkit::oracle
