#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lixelkit/diffcore/tensor.hpp"

namespace lixelkit::heatmap {

using diff::Tensor;

enum class LayoutKind { lixel_xyz, pixel_xy_plus_lixel_z, voxel_xyz };

std::string to_string(LayoutKind kind);
LayoutKind parse_layout_kind(const std::string& name);

/// Cell extents of a heatmap volume. Cell i covers [i, i+1) and its
/// coordinate is the index i itself, which is what soft-argmax returns.
struct HeatmapLayout {
    LayoutKind kind = LayoutKind::lixel_xyz;
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t depth = 0;

    /// Throws unless every extent is at least 2.
    void validate() const;
    /// Heatmap cells stored per landmark.
    std::uint64_t cells_per_landmark() const;
};

/// Per-landmark x/y/z likelihoods. hx [..., N, width], hy [..., N, height],
/// hz [..., N, depth]; every row is non-negative and sums to one.
struct LixelHeatmapSet {
    Tensor hx, hy, hz;

    /// Row-wise softmax of raw head outputs.
    static LixelHeatmapSet from_logits(const Tensor& lx, const Tensor& ly, const Tensor& lz);
};

/// Landmark coordinates in cell units, [..., N, 3] ordered (x, y, z).
/// Components are expected in [0, width) x [0, height) x [0, depth).
struct ContinuousCoords {
    Tensor xyz;

    /// Per-landmark flag: true when every component lies in its half-open range.
    std::vector<bool> in_range(const HeatmapLayout& layout) const;
};

// ---------------------------------------------------------------------------
// Gaussian rendering
// ---------------------------------------------------------------------------

/// Gaussian width of the rendered joint heatmaps, in cells.
inline constexpr double kDefaultSigma = 2.5;

/// values[..., j, z, y, x] = exp(-((x-px)^2 + (y-py)^2 + (z-pz)^2) / (2 sigma^2))
/// at integer cell coordinates. coords [..., J, 3]; result [..., J, D, H, W].
/// Differentiable with respect to coords.
Tensor render_gaussian_3d(const Tensor& coords, const HeatmapLayout& layout, double sigma = kDefaultSigma);

/// 1-D counterpart: centers [...] -> [..., length], unnormalized.
Tensor render_gaussian_1d(const Tensor& centers, std::size_t length, double sigma = kDefaultSigma);

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

/// sum_i i * softmax(logits)_i along the last axis; the axis is dropped.
Tensor soft_argmax_1d(const Tensor& logits);

/// sum_i i * p_i along the last axis of already normalized likelihoods.
Tensor expectation_1d(const Tensor& probs);

/// Expected coordinates of each landmark: [..., N, 3].
ContinuousCoords decode(const LixelHeatmapSet& heatmaps);

/// Divides each last-axis row by its sum (rows must have positive mass).
Tensor normalize_rows(const Tensor& values);

// ---------------------------------------------------------------------------
// Marginalization
// ---------------------------------------------------------------------------

enum class MarginalAxis { x, y, xy };
enum class MarginalMethod { avg, max, weighted_sum };

std::string to_string(MarginalMethod method);
MarginalMethod parse_marginal_method(const std::string& name);

/// Reduces a feature map [..., H, W] along x (-> [..., H]), y (-> [..., W])
/// or both (-> [...]). weighted_sum takes a learned weight vector spanning
/// the reduced axis: [W] for x, [H] for y, [H*W] for xy.
Tensor marginalize(const Tensor& feature, MarginalAxis axis, MarginalMethod method, const Tensor& weights = {});

// ---------------------------------------------------------------------------
// Memory model
// ---------------------------------------------------------------------------

/// Exact heatmap cell count for V landmarks at resolution D on every axis:
/// 3VD (lixel), V(D^2 + D) (pixel + lixel), VD^3 (voxel). Throws on overflow.
std::uint64_t memory_cells(std::uint64_t vertices, std::uint64_t resolution, LayoutKind kind);

// ---------------------------------------------------------------------------
// Targets
// ---------------------------------------------------------------------------

/// Groundtruth coordinates packaged for the coordinate losses. Each row of
/// `mask` marks which axes carry supervision; `out_of_range` flags rows that
/// fall outside the heatmap volume (kept, not clipped).
struct CoordTarget {
    std::vector<std::array<double, 3>> coords;
    std::vector<std::array<double, 3>> mask;
    std::vector<bool> out_of_range;
};

/// `has_z == false` yields (1, 1, 0) masks: the z term then contributes nothing.
CoordTarget encode_target(const std::vector<std::array<double, 3>>& coords, bool has_z, const HeatmapLayout& layout);

}  // namespace lixelkit::heatmap
