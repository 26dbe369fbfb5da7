#include "lixelkit/camera/camera.hpp"

#include <cmath>
#include <string>

#include "lixelkit/diffcore/ops.hpp"

namespace lixelkit::camera {

namespace {

double determinant(const Affine2x3& a) { return a[0] * a[4] - a[1] * a[3]; }

void check_last(const Tensor& t, std::size_t n, const char* op) {
    if (t.dim() < 1 || t.size(-1) != n) {
        throw ShapeError(std::string(op) + ": last axis must be " + std::to_string(n) + ", got " +
                         diff::to_string(t.shape()));
    }
}

Tensor component(const Tensor& t, std::size_t k) {
    diff::Shape s = t.shape();
    s.pop_back();
    return diff::reshape(diff::narrow(t, -1, k, 1), s);
}

Tensor join(std::initializer_list<Tensor> parts) {
    std::vector<Tensor> cols;
    for (const auto& p : parts) {
        diff::Shape s = p.shape();
        s.push_back(1);
        cols.push_back(diff::reshape(p, s));
    }
    return diff::concat(std::span<const Tensor>(cols), -1);
}

// Applies p -> M p + b with a row-major 2x3 [M | b].
Tensor affine_map(const Tensor& points, const Affine2x3& a) {
    auto x = component(points, 0);
    auto y = component(points, 1);
    return join({x * a[0] + y * a[1] + a[2], x * a[3] + y * a[4] + a[5]});
}

}  // namespace

void CameraFrame::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw Error("camera: focal lengths must be positive");
    if (!(depth_span > 0.0)) throw Error("camera: depth_span must be positive");
    if (!(std::abs(determinant(affine)) > 1e-12)) throw Error("camera: crop affine is singular");
    if (input_width == 0 || input_height == 0) throw Error("camera: input size must be positive");
    for (double v : {fx, fy, cx, cy, depth_span, root_depth})
        if (!std::isfinite(v)) throw Error("camera: non-finite parameter");
}

CameraFrame CameraFrame::normalized(std::size_t input_width, std::size_t input_height, double depth_span,
                                    double root_depth) {
    CameraFrame f;
    const double focal = std::sqrt(static_cast<double>(input_width * input_height)) * kNormalizedFocalScale;
    f.fx = f.fy = focal;
    f.cx = static_cast<double>(input_width) / 2.0;
    f.cy = static_cast<double>(input_height) / 2.0;
    f.input_width = input_width;
    f.input_height = input_height;
    f.depth_span = depth_span;
    f.root_depth = root_depth;
    return f;
}

nlohmann::json to_json(const CameraFrame& f) {
    return {{"fx", f.fx},
            {"fy", f.fy},
            {"cx", f.cx},
            {"cy", f.cy},
            {"affine", {{f.affine[0], f.affine[1], f.affine[2]}, {f.affine[3], f.affine[4], f.affine[5]}}},
            {"input_size", {f.input_width, f.input_height}},
            {"depth_span", f.depth_span},
            {"root_depth", f.root_depth}};
}

CameraFrame camera_from_json(const nlohmann::json& j) {
    CameraFrame f;
    try {
        f.fx = j.at("fx").get<double>();
        f.fy = j.at("fy").get<double>();
        f.cx = j.at("cx").get<double>();
        f.cy = j.at("cy").get<double>();
        const auto& a = j.at("affine");
        if (a.size() != 2 || a[0].size() != 3 || a[1].size() != 3) throw Error("camera: affine must be 2x3");
        for (std::size_t r = 0; r < 2; ++r)
            for (std::size_t c = 0; c < 3; ++c) f.affine[r * 3 + c] = a[r][c].get<double>();
        if (j.contains("input_size")) {
            f.input_width = j["input_size"].at(0).get<std::size_t>();
            f.input_height = j["input_size"].at(1).get<std::size_t>();
        }
        f.depth_span = j.at("depth_span").get<double>();
        f.root_depth = j.at("root_depth").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("camera: bad JSON: ") + e.what());
    }
    f.validate();
    return f;
}

Affine2x3 invert_affine(const Affine2x3& a) {
    const double det = determinant(a);
    if (!(std::abs(det) > 1e-12)) throw Error("invert_affine: singular 2x2 block");
    const double i00 = a[4] / det, i01 = -a[1] / det, i10 = -a[3] / det, i11 = a[0] / det;
    return {i00, i01, -(i00 * a[2] + i01 * a[5]), i10, i11, -(i10 * a[2] + i11 * a[5])};
}

Tensor cells_to_crop_pixels(const Tensor& cells, const heatmap::HeatmapLayout& layout, std::size_t input_width,
                            std::size_t input_height, double depth_span) {
    check_last(cells, 3, "cells_to_crop_pixels");
    if (layout.width == 0 || layout.height == 0 || layout.depth == 0) throw Error("cells_to_crop_pixels: empty layout");
    const double sx = static_cast<double>(input_width) / static_cast<double>(layout.width);
    const double sy = static_cast<double>(input_height) / static_cast<double>(layout.height);
    const double sz = depth_span / static_cast<double>(layout.depth);
    return join({component(cells, 0) * sx, component(cells, 1) * sy, component(cells, 2) * sz - 0.5 * depth_span});
}

Tensor apply_inverse_affine(const Tensor& points, const Affine2x3& affine) {
    check_last(points, 2, "apply_inverse_affine");
    return affine_map(points, invert_affine(affine));
}

Tensor apply_affine(const Tensor& points, const Affine2x3& affine) {
    check_last(points, 2, "apply_affine");
    return affine_map(points, affine);
}

Tensor back_project(const Tensor& points, const Tensor& depth, const CameraFrame& frame) {
    check_last(points, 2, "back_project");
    auto u = component(points, 0);
    auto v = component(points, 1);
    if (u.shape() != depth.shape()) {
        throw ShapeError("back_project: depth " + diff::to_string(depth.shape()) + " does not match points " +
                         diff::to_string(points.shape()));
    }
    return join({(u - frame.cx) * depth * (1.0 / frame.fx), (v - frame.cy) * depth * (1.0 / frame.fy), depth});
}

Tensor project(const Tensor& points, const CameraFrame& frame) {
    check_last(points, 3, "project");
    auto z = component(points, 2);
    return join({component(points, 0) / z * frame.fx + frame.cx, component(points, 1) / z * frame.fy + frame.cy});
}

Tensor recover_mesh(const Tensor& cells, const CameraFrame& frame, const heatmap::HeatmapLayout& layout) {
    frame.validate();
    auto crop = cells_to_crop_pixels(cells, layout, frame.input_width, frame.input_height, frame.depth_span);
    auto pixels = apply_inverse_affine(diff::narrow(crop, -1, 0, 2), frame.affine);
    auto depth = component(crop, 2) + frame.root_depth;
    return back_project(pixels, depth, frame);
}

Tensor encode_to_cells(const Tensor& points, const CameraFrame& frame, const heatmap::HeatmapLayout& layout) {
    frame.validate();
    auto crop = apply_affine(project(points, frame), frame.affine);
    const double sx = static_cast<double>(layout.width) / static_cast<double>(frame.input_width);
    const double sy = static_cast<double>(layout.height) / static_cast<double>(frame.input_height);
    const double sz = static_cast<double>(layout.depth) / frame.depth_span;
    auto z_rel = component(points, 2) - frame.root_depth;
    return join({component(crop, 0) * sx, component(crop, 1) * sy, (z_rel + 0.5 * frame.depth_span) * sz});
}

}  // namespace lixelkit::camera
