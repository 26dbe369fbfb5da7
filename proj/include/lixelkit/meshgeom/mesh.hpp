#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "lixelkit/diffcore/tensor.hpp"

namespace lixelkit::mesh {

using diff::Tensor;
using Vec3 = std::array<double, 3>;
using Face = std::array<std::uint32_t, 3>;

/// Triangle mesh. Faces are wound counter-clockwise when seen from outside.
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;

    /// Throws on out-of-range or repeated face indices, or when V < 3 or F < 1.
    void validate() const;
    /// Vertices as a [V, 3] tensor.
    Tensor vertex_tensor() const;
};

/// Dense [J, V] joint regression matrix with non-negative rows summing to one.
struct JointRegressor {
    std::size_t joints = 0;
    std::size_t vertices = 0;
    std::vector<double> weights;

    void validate() const;
    Tensor tensor() const;
};

/// joints = weights x vertices. vertices [V, 3] or [B, V, 3].
Tensor regress_joints(const JointRegressor& regressor, const Tensor& vertices);

std::vector<Vec3> to_points(const Tensor& xyz);
Tensor from_points(const std::vector<Vec3>& points);

TriMesh read_obj(const std::filesystem::path& path);
void write_obj(const std::filesystem::path& path, const TriMesh& mesh);

}  // namespace lixelkit::mesh
