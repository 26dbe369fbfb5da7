#pragma once

#include <vector>

#include "lixelkit/meshgeom/mesh.hpp"

namespace lixelkit::mesh {

/// Mean per-joint Euclidean distance after subtracting the root joint from both sets.
double mpjpe(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt, std::size_t root);

/// Similarity transform s * R * p + t that best maps pred onto gt in the
/// least-squares sense, with det(R) = +1.
struct Alignment {
    double scale = 1.0;
    std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
    Vec3 translation{0, 0, 0};

    Vec3 apply(const Vec3& p) const;
};

Alignment procrustes(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt, bool with_scale = true);

/// Mean per-joint distance after aligning pred onto gt with procrustes().
double pa_mpjpe(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt, bool with_scale = true);

}  // namespace lixelkit::mesh
