#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lixelkit/heatmap/heatmap.hpp"

namespace lixelkit::net {

enum class Cascade { mesh_only, pose_then_mesh, gt_pose_to_mesh };
enum class MarginalStage { late, early };
enum class Representation { coord_regression, fc_lixel, conv_lixel, parametric };
enum class InitScheme { gaussian_1e3, kaiming };

std::string to_string(Cascade v);
std::string to_string(MarginalStage v);
std::string to_string(Representation v);
std::string to_string(InitScheme v);
Cascade parse_cascade(const std::string& s);
MarginalStage parse_marginal_stage(const std::string& s);
Representation parse_representation(const std::string& s);
InitScheme parse_init(const std::string& s);

/// Shapes and variants of the pose/mesh network pair.
///
/// The stem halves the input; each of the three trunk blocks halves it again,
/// so the input is 16h x 16w, the early tap is 8h x 8w and the deep features
/// are h x w. Heads upsample the deep features by 8.
struct NetConfig {
    std::size_t joints = 8;
    std::size_t vertices = 0;
    std::size_t depth = 32;
    std::size_t deep_h = 4;
    std::size_t deep_w = 4;
    std::size_t in_channels = 8;

    std::size_t stem_channels = 16;
    std::vector<std::size_t> trunk_channels{32, 48, 64};
    std::size_t head_channels = 32;
    std::size_t fuse_channels = 16;
    std::size_t fc_hidden = 256;

    heatmap::MarginalMethod marginalize_method = heatmap::MarginalMethod::avg;
    MarginalStage marginalize_stage = MarginalStage::late;
    Cascade cascade = Cascade::pose_then_mesh;
    Representation representation = Representation::conv_lixel;
    heatmap::LayoutKind layout = heatmap::LayoutKind::lixel_xyz;
    double sigma = heatmap::kDefaultSigma;
    InitScheme init = InitScheme::kaiming;
    /// Largest per-sample mesh heatmap (cells) a configuration may request.
    std::uint64_t cell_budget = 500000;

    std::size_t input_h() const { return 16 * deep_h; }
    std::size_t input_w() const { return 16 * deep_w; }
    std::size_t early_h() const { return 8 * deep_h; }
    std::size_t early_w() const { return 8 * deep_w; }
    std::size_t deep_channels() const { return trunk_channels.back(); }
    heatmap::HeatmapLayout mesh_layout() const { return {layout, early_w(), early_h(), depth}; }
    heatmap::HeatmapLayout pose_layout() const { return {heatmap::LayoutKind::lixel_xyz, early_w(), early_h(), depth}; }
    /// Mesh heatmap cells per sample for the configured layout.
    std::uint64_t mesh_cells() const;

    /// Throws with a readable message on inconsistent settings, including a
    /// mesh heatmap larger than cell_budget.
    void validate() const;
};

}  // namespace lixelkit::net
