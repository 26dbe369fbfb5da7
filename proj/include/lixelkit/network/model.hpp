#pragma once

#include <memory>
#include <string>
#include <vector>

#include "lixelkit/diffcore/checkpoint.hpp"
#include "lixelkit/meshgeom/losses.hpp"
#include "lixelkit/network/heads.hpp"

namespace lixelkit::net {

/// Fixed mesh connectivity the losses need.
struct MeshTopology {
    std::vector<mesh::Face> faces;
    mesh::JointRegressor regressor;
};

struct ForwardResult {
    HeadOutput pose;     // empty in mesh_only mode
    HeadOutput mesh;
    Tensor mesh_joints;  // regressor applied to mesh.coords, [B, J, 3]
    mesh::LossParts losses;
    Tensor total;
};

/// Parameter groups. The stem is shared by both sub-networks.
inline constexpr const char* kStemGroup = "stem";
inline constexpr const char* kPoseGroup = "posenet";
inline constexpr const char* kMeshGroup = "meshnet";

/// PoseNet -> Gaussian rendering -> MeshNet cascade.
class Model {
public:
    Model(NetConfig cfg, MeshTopology topology, std::uint64_t seed, ParametricDecoder decoder = {});
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;

    /// Early tap [B, stem, 8h, 8w].
    Tensor stem(const Tensor& image, bool training);
    /// PoseNet trunk + heads; requires a cascade that runs PoseNet.
    HeadOutput pose(const Tensor& early, const Batch& batch, bool training);
    /// Fusion block input to the MeshNet trunk. `pose_coords` may be undefined (mesh_only).
    Tensor fuse(const Tensor& pose_coords, const Tensor& early, bool training);
    HeadOutput mesh(const Tensor& fused, const Batch& batch, bool training);

    /// Full cascade with all five loss terms. Terms that need a groundtruth
    /// mesh are zero when batch.has_mesh is false.
    ForwardResult forward(const Batch& batch, bool training, const mesh::LossWeights& weights = {});

    diff::ParameterSet& params() { return params_; }
    const diff::ParameterSet& params() const { return params_; }
    const NetConfig& config() const { return cfg_; }
    const MeshTopology& topology() const { return topology_; }

    /// Scalars in parameters whose names start with `prefix`.
    std::size_t parameter_count(const std::string& prefix) const;
    /// Parameters of the mesh output head alone (trunks excluded).
    std::size_t mesh_head_parameters() const { return parameter_count("meshnet.head."); }

    /// Parameters and batch-norm statistics as named arrays.
    std::vector<diff::NamedArray> state() const;
    /// Restores values written by state(); names and shapes must match exactly.
    void load_state(const std::vector<diff::NamedArray>& arrays);

private:
    NetConfig cfg_;
    MeshTopology topology_;
    diff::ParameterSet params_;
    ConvBlock stem_;
    Backbone pose_trunk_;
    std::unique_ptr<LixelHead> pose_head_;
    Tensor fuse_heat_weight_;
    ConvBlock fuse_;
    Backbone mesh_trunk_;
    std::unique_ptr<MeshHeadBase> mesh_head_;
};

}  // namespace lixelkit::net
