#pragma once

#include <vector>

#include "lixelkit/diffcore/tensor.hpp"
#include "lixelkit/meshgeom/mesh.hpp"
#include "lixelkit/network/model.hpp"

namespace lixelkit::exp {

using diff::Tensor;
using mesh::Vec3;

struct TemplateOptions {
    std::size_t ring_segments = 6;
    std::size_t rings = 4;
    double radius = 50.0;
};

/// Articulated capsule chain: one capsule per bone, each rigidly attached to
/// the bone's parent joint. Millimeters, y pointing down.
struct ToyTemplate {
    mesh::TriMesh rest;
    mesh::JointRegressor regressor;
    std::vector<int> parents;           // parents[0] == -1
    std::vector<Vec3> rest_joints;
    std::vector<std::size_t> vertex_joint;  // joint whose rotation moves each vertex
    std::vector<std::size_t> vertex_bone;   // child joint of the capsule each vertex belongs to

    std::size_t joints() const { return parents.size(); }
    std::size_t vertices() const { return rest.vertices.size(); }
    net::MeshTopology topology() const { return {rest.faces, regressor}; }
};

/// Eight joints, seven bones: pelvis, chest, head, two arms, two legs with a
/// single foot segment on the left leg.
ToyTemplate make_toy_template(const TemplateOptions& options = {});

/// Rotation matrices [..., 3, 3] from axis-angle vectors [..., 3].
/// Smoothed near zero angle so the gradient stays finite.
Tensor axis_angle_to_matrix(const Tensor& axis_angle);

struct PosedMesh {
    Tensor vertices;  // [B, V, 3] millimeters relative to the root joint
    Tensor joints;    // [B, J, 3]
};

/// Forward kinematics + rigid skinning. axis_angle [B, J, 3] holds local
/// rotations (joint 0 carries the global orientation). Differentiable.
PosedMesh pose_template(const ToyTemplate& tmpl, const Tensor& axis_angle);

}  // namespace lixelkit::exp
