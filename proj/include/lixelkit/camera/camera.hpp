#pragma once

#include <array>

#include "json.hpp"
#include "lixelkit/diffcore/tensor.hpp"
#include "lixelkit/heatmap/heatmap.hpp"

namespace lixelkit::camera {

using diff::Tensor;

/// Row-major 2x3 map from original-image pixels to network-input pixels.
using Affine2x3 = std::array<double, 6>;

inline constexpr Affine2x3 kIdentityAffine{1, 0, 0, 0, 1, 0};
/// Focal length of the fallback intrinsics, per unit of sqrt(input area).
inline constexpr double kNormalizedFocalScale = 5.0;

struct CameraFrame {
    double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
    Affine2x3 affine = kIdentityAffine;
    std::size_t input_width = 256;
    std::size_t input_height = 256;
    /// Millimeters covered by the depth axis of the heatmap, centered on root_depth.
    double depth_span = 2000.0;
    /// Absolute depth of the root in millimeters.
    double root_depth = 0.0;

    /// Throws on non-positive focal lengths or depth span, or a singular affine.
    void validate() const;

    /// fx = fy = sqrt(w * h) * kNormalizedFocalScale, principal point at the
    /// input center, identity crop.
    static CameraFrame normalized(std::size_t input_width, std::size_t input_height, double depth_span,
                                  double root_depth);
};

nlohmann::json to_json(const CameraFrame& frame);
CameraFrame camera_from_json(const nlohmann::json& j);

/// Inverse of an invertible 2x3 affine.
Affine2x3 invert_affine(const Affine2x3& a);

/// Heatmap cells [..., 3] -> network-input pixels for x and y, and depth
/// relative to the root for z: (z / depth - 0.5) * depth_span.
Tensor cells_to_crop_pixels(const Tensor& cells, const heatmap::HeatmapLayout& layout, std::size_t input_width,
                            std::size_t input_height, double depth_span);

/// Network-input pixels [..., 2] -> original-image pixels.
Tensor apply_inverse_affine(const Tensor& points, const Affine2x3& affine);
/// Original-image pixels [..., 2] -> network-input pixels.
Tensor apply_affine(const Tensor& points, const Affine2x3& affine);

/// Pinhole back-projection of pixels [..., 2] at absolute depths [...] to
/// camera-frame millimeters [..., 3].
Tensor back_project(const Tensor& points, const Tensor& depth, const CameraFrame& frame);

/// Pinhole projection of camera-frame points [..., 3] to original-image pixels [..., 2].
Tensor project(const Tensor& points, const CameraFrame& frame);

/// Heatmap cells [..., N, 3] -> camera-frame millimeters [..., N, 3].
/// Differentiable with respect to the cells.
Tensor recover_mesh(const Tensor& cells, const CameraFrame& frame, const heatmap::HeatmapLayout& layout);

/// Inverse of recover_mesh: camera-frame millimeters -> heatmap cells.
Tensor encode_to_cells(const Tensor& points, const CameraFrame& frame, const heatmap::HeatmapLayout& layout);

}  // namespace lixelkit::camera
