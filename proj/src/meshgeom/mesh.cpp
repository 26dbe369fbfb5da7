#include "lixelkit/meshgeom/mesh.hpp"

#include <cmath>
#include <string>

#include "lixelkit/diffcore/ops.hpp"

namespace lixelkit::mesh {

void TriMesh::validate() const {
    if (vertices.size() < 3) throw Error("mesh: need at least 3 vertices, got " + std::to_string(vertices.size()));
    if (faces.empty()) throw Error("mesh: no faces");
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto& t = faces[f];
        for (auto i : t) {
            if (i >= vertices.size()) {
                throw Error("mesh: face " + std::to_string(f) + " references vertex " + std::to_string(i) + " of " +
                            std::to_string(vertices.size()));
            }
        }
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) throw Error("mesh: face " + std::to_string(f) + " repeats a vertex");
    }
}

Tensor TriMesh::vertex_tensor() const { return from_points(vertices); }

void JointRegressor::validate() const {
    if (joints == 0 || vertices == 0 || weights.size() != joints * vertices) {
        throw Error("joint regressor: expected " + std::to_string(joints) + "x" + std::to_string(vertices) +
                    " weights, got " + std::to_string(weights.size()));
    }
    for (std::size_t j = 0; j < joints; ++j) {
        double s = 0.0;
        for (std::size_t v = 0; v < vertices; ++v) {
            const double w = weights[j * vertices + v];
            if (!(w >= 0.0)) throw Error("joint regressor: negative weight in row " + std::to_string(j));
            s += w;
        }
        if (std::abs(s - 1.0) > 1e-6) {
            throw Error("joint regressor: row " + std::to_string(j) + " sums to " + std::to_string(s));
        }
    }
}

Tensor JointRegressor::tensor() const { return Tensor::from({joints, vertices}, weights); }

Tensor regress_joints(const JointRegressor& regressor, const Tensor& vertices) {
    if (vertices.dim() < 2 || vertices.size(-1) != 3 || vertices.size(-2) != regressor.vertices) {
        throw ShapeError("regress_joints: regressor expects [.., " + std::to_string(regressor.vertices) +
                         ", 3] vertices, got " + diff::to_string(vertices.shape()));
    }
    return diff::matmul(regressor.tensor(), vertices);
}

std::vector<Vec3> to_points(const Tensor& xyz) {
    if (xyz.dim() != 2 || xyz.size(1) != 3) throw ShapeError("to_points: need [N, 3], got " + diff::to_string(xyz.shape()));
    std::vector<Vec3> out(xyz.size(0));
    const auto d = xyz.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = {d[3 * i], d[3 * i + 1], d[3 * i + 2]};
    return out;
}

Tensor from_points(const std::vector<Vec3>& points) {
    std::vector<double> flat;
    flat.reserve(points.size() * 3);
    for (const auto& p : points) flat.insert(flat.end(), p.begin(), p.end());
    return Tensor::from({points.size(), 3}, std::move(flat));
}

}  // namespace lixelkit::mesh
