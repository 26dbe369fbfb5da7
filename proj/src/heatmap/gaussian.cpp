#include <cmath>
#include <string>

#include "lixelkit/heatmap/heatmap.hpp"

namespace lixelkit::heatmap {

std::string to_string(LayoutKind kind) {
    switch (kind) {
        case LayoutKind::lixel_xyz: return "lixel_xyz";
        case LayoutKind::pixel_xy_plus_lixel_z: return "pixel_xy_plus_lixel_z";
        case LayoutKind::voxel_xyz: return "voxel_xyz";
    }
    return "unknown";
}

LayoutKind parse_layout_kind(const std::string& name) {
    if (name == "lixel_xyz" || name == "lixel") return LayoutKind::lixel_xyz;
    if (name == "pixel_xy_plus_lixel_z" || name == "pixel") return LayoutKind::pixel_xy_plus_lixel_z;
    if (name == "voxel_xyz" || name == "voxel") return LayoutKind::voxel_xyz;
    throw Error("unknown heatmap layout '" + name + "'");
}

void HeatmapLayout::validate() const {
    if (width < 2 || height < 2 || depth < 2) {
        throw Error("heatmap layout: extents must be >= 2, got " + std::to_string(width) + "x" +
                    std::to_string(height) + "x" + std::to_string(depth));
    }
}

std::uint64_t HeatmapLayout::cells_per_landmark() const {
    switch (kind) {
        case LayoutKind::lixel_xyz: return width + height + depth;
        case LayoutKind::pixel_xy_plus_lixel_z: return width * height + depth;
        case LayoutKind::voxel_xyz: return static_cast<std::uint64_t>(width) * height * depth;
    }
    return 0;
}

std::vector<bool> ContinuousCoords::in_range(const HeatmapLayout& layout) const {
    const auto v = xyz.data();
    const double ext[3] = {static_cast<double>(layout.width), static_cast<double>(layout.height),
                           static_cast<double>(layout.depth)};
    std::vector<bool> ok(v.size() / 3);
    for (std::size_t i = 0; i < ok.size(); ++i) {
        bool inside = true;
        for (int a = 0; a < 3; ++a) inside = inside && v[i * 3 + a] >= 0.0 && v[i * 3 + a] < ext[a];
        ok[i] = inside;
    }
    return ok;
}

namespace {

void check_sigma(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error("gaussian: sigma must be positive, got " + std::to_string(sigma));
}

void check_finite(const Tensor& t, const char* op) {
    for (double v : t.data()) {
        if (!std::isfinite(v)) throw Error(std::string(op) + ": non-finite coordinate");
    }
}

// g[k][i] = exp(-(i - c_k)^2 / (2 sigma^2)) for i in [0, length).
std::vector<double> profiles(std::span<const double> centers, std::size_t stride, std::size_t offset,
                             std::size_t count, std::size_t length, double sigma) {
    std::vector<double> g(count * length);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (std::size_t k = 0; k < count; ++k) {
        const double c = centers[k * stride + offset];
        for (std::size_t i = 0; i < length; ++i) {
            const double d = static_cast<double>(i) - c;
            g[k * length + i] = std::exp(-d * d * inv);
        }
    }
    return g;
}

}  // namespace

Tensor render_gaussian_3d(const Tensor& coords, const HeatmapLayout& layout, double sigma) {
    check_sigma(sigma);
    check_finite(coords, "render_gaussian_3d");
    if (coords.dim() < 2 || coords.shape().back() != 3) {
        throw ShapeError("render_gaussian_3d: coords must be [..., J, 3], got " + diff::to_string(coords.shape()));
    }
    const std::size_t W = layout.width, H = layout.height, D = layout.depth;
    const std::size_t count = coords.numel() / 3;
    const auto cv = coords.data();
    auto gx = profiles(cv, 3, 0, count, W, sigma);
    auto gy = profiles(cv, 3, 1, count, H, sigma);
    auto gz = profiles(cv, 3, 2, count, D, sigma);
    const std::size_t vol = D * H * W;
    std::vector<double> out(count * vol);
    for (std::size_t k = 0; k < count; ++k)
        for (std::size_t z = 0; z < D; ++z)
            for (std::size_t y = 0; y < H; ++y) {
                const double zy = gz[k * D + z] * gy[k * H + y];
                double* row = out.data() + k * vol + (z * H + y) * W;
                const double* px = gx.data() + k * W;
                for (std::size_t x = 0; x < W; ++x) row[x] = zy * px[x];
            }
    diff::Shape shape(coords.shape().begin(), coords.shape().end() - 1);
    shape.insert(shape.end(), {D, H, W});
    return diff::make_result("render_gaussian_3d", std::move(shape), std::move(out), {coords},
                             [=](diff::Node& self) {
                                 auto gc = diff::input_grad(self, 0);
                                 const auto& c = self.inputs[0]->value;
                                 const double inv_s2 = 1.0 / (sigma * sigma);
                                 for (std::size_t k = 0; k < count; ++k) {
                                     double sx = 0.0, sy = 0.0, sz = 0.0;
                                     for (std::size_t z = 0; z < D; ++z)
                                         for (std::size_t y = 0; y < H; ++y)
                                             for (std::size_t x = 0; x < W; ++x) {
                                                 const std::size_t idx = k * vol + (z * H + y) * W + x;
                                                 const double gv = self.grad[idx] * self.value[idx];
                                                 sx += gv * (static_cast<double>(x) - c[k * 3 + 0]);
                                                 sy += gv * (static_cast<double>(y) - c[k * 3 + 1]);
                                                 sz += gv * (static_cast<double>(z) - c[k * 3 + 2]);
                                             }
                                     gc[k * 3 + 0] += sx * inv_s2;
                                     gc[k * 3 + 1] += sy * inv_s2;
                                     gc[k * 3 + 2] += sz * inv_s2;
                                 }
                             });
}

Tensor render_gaussian_1d(const Tensor& centers, std::size_t length, double sigma) {
    check_sigma(sigma);
    check_finite(centers, "render_gaussian_1d");
    const std::size_t count = centers.numel();
    auto out = profiles(centers.data(), 1, 0, count, length, sigma);
    diff::Shape shape = centers.shape();
    shape.push_back(length);
    return diff::make_result("render_gaussian_1d", std::move(shape), std::move(out), {centers},
                             [=](diff::Node& self) {
                                 auto gc = diff::input_grad(self, 0);
                                 const auto& c = self.inputs[0]->value;
                                 for (std::size_t k = 0; k < count; ++k) {
                                     double s = 0.0;
                                     for (std::size_t i = 0; i < length; ++i) {
                                         const std::size_t idx = k * length + i;
                                         s += self.grad[idx] * self.value[idx] * (static_cast<double>(i) - c[k]);
                                     }
                                     gc[k] += s / (sigma * sigma);
                                 }
                             });
}

CoordTarget encode_target(const std::vector<std::array<double, 3>>& coords, bool has_z, const HeatmapLayout& layout) {
    CoordTarget t;
    t.coords = coords;
    t.mask.assign(coords.size(), {1.0, 1.0, has_z ? 1.0 : 0.0});
    const double ext[3] = {static_cast<double>(layout.width), static_cast<double>(layout.height),
                           static_cast<double>(layout.depth)};
    for (const auto& c : coords) {
        bool out = false;
        for (int a = 0; a < 3; ++a) out = out || !(c[a] >= 0.0 && c[a] < ext[a]);
        t.out_of_range.push_back(out);
    }
    return t;
}

}  // namespace lixelkit::heatmap
