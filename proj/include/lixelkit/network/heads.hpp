#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "lixelkit/camera/camera.hpp"
#include "lixelkit/heatmap/heatmap.hpp"
#include "lixelkit/network/layers.hpp"

namespace lixelkit::net {

/// One mini-batch. Coordinates are heatmap cells.
struct Batch {
    Tensor image;       // [B, C, 16h, 16w]
    Tensor joints;      // [B, J, 3]
    Tensor joint_mask;  // [B, J, 3] or undefined (all axes supervised)
    Tensor mesh;        // [B, V, 3]
    Tensor mesh_mask;   // [B, V, 3] or undefined
    bool has_mesh = true;
    std::vector<camera::CameraFrame> cameras;

    std::size_t size() const { return image.size(0); }
};

struct HeadOutput {
    heatmap::LixelHeatmapSet heatmaps;  // undefined members for direct regression heads
    Tensor coords;                      // [B, N, 3]
};

/// Maps regressed parameters [B, P] to mesh cells [B, V, 3] for the parametric head.
struct ParametricDecoder {
    std::size_t param_count = 0;
    std::function<Tensor(const Tensor& params, const Batch& batch)> decode;
};

/// Stem + strided trunk. The stem output is the early tap.
struct Backbone {
    std::vector<ConvBlock> blocks;

    Backbone() = default;
    Backbone(LayerFactory& f, const std::string& prefix, const std::string& group, std::size_t in,
             const std::vector<std::size_t>& channels);
    Tensor operator()(const Tensor& x, bool training);
};

class MeshHeadBase {
public:
    virtual ~MeshHeadBase() = default;
    virtual HeadOutput forward(const Tensor& deep, const Batch& batch, bool training) = 0;
};

/// Convolutional lixel head: upsampling modules, marginalization and 1x1
/// 1-D convolutions for x and y; pooled fully-connected block for z.
class LixelHead : public MeshHeadBase {
public:
    LixelHead(LayerFactory& f, const std::string& prefix, const std::string& group, const NetConfig& cfg,
              std::size_t landmarks);
    HeadOutput forward(const Tensor& deep, const Batch& batch, bool training) override;

    /// Raw x, y, z logits [B, N, 8w], [B, N, 8h], [B, N, D].
    std::array<Tensor, 3> logits(const Tensor& deep, bool training);

private:
    Tensor z_logits(const Tensor& deep, bool training);

    heatmap::MarginalMethod method_;
    MarginalStage stage_;
    std::size_t landmarks_, head_channels_, depth_;
    std::vector<UpBlock> up_;
    Tensor weights_x_, weights_y_;  // weighted_sum only: span the reduced axis
    Pointwise1d out_x_, out_y_;
    Linear z_fc_;
    BatchNorm z_bn_;
    Pointwise1d out_z_;
};

/// Pixel (xy) + lixel (z) or voxel (xyz) likelihoods decoded through their marginals.
class GridHead : public MeshHeadBase {
public:
    GridHead(LayerFactory& f, const std::string& prefix, const std::string& group, const NetConfig& cfg,
             std::size_t landmarks);
    HeadOutput forward(const Tensor& deep, const Batch& batch, bool training) override;

private:
    heatmap::LayoutKind kind_;
    std::size_t landmarks_, head_channels_, depth_;
    std::vector<UpBlock> up_;
    Pointwise2d out_;
    Linear z_fc_;
    BatchNorm z_bn_;
    Pointwise1d out_z_;
};

/// Flattened deep features -> hidden layer -> per-landmark x, y, z logits.
class FcLixelHead : public MeshHeadBase {
public:
    FcLixelHead(LayerFactory& f, const std::string& prefix, const std::string& group, const NetConfig& cfg,
                std::size_t landmarks);
    HeadOutput forward(const Tensor& deep, const Batch& batch, bool training) override;

private:
    std::size_t landmarks_, width_, height_, depth_;
    Linear hidden_, out_;
};

/// Flattened deep features -> hidden layer -> coordinates, offset to the volume center.
class CoordHead : public MeshHeadBase {
public:
    CoordHead(LayerFactory& f, const std::string& prefix, const std::string& group, const NetConfig& cfg,
              std::size_t landmarks);
    HeadOutput forward(const Tensor& deep, const Batch& batch, bool training) override;

private:
    std::size_t landmarks_;
    Tensor center_;
    Linear hidden_, out_;
};

/// Flattened deep features -> hidden layer -> low-dimensional parameters -> decoder.
class ParametricHead : public MeshHeadBase {
public:
    ParametricHead(LayerFactory& f, const std::string& prefix, const std::string& group, const NetConfig& cfg,
                   ParametricDecoder decoder);
    HeadOutput forward(const Tensor& deep, const Batch& batch, bool training) override;

private:
    ParametricDecoder decoder_;
    Linear hidden_, out_;
};

/// Gaussian joint heatmaps rendered at `coords` [B, J, 3] (values only; no
/// gradient reaches `coords`), flattened to [B, J*D, 8h, 8w].
Tensor render_pose_channels(const Tensor& coords, const NetConfig& cfg);

}  // namespace lixelkit::net
