#pragma once

#include <string>
#include <vector>

#include "lixelkit/meshgeom/mesh.hpp"

namespace lixelkit::mesh {

/// Sum over landmarks and axes of mask * |pred - gt|, averaged over the batch.
/// pred/gt [N, 3] or [B, N, 3]; mask broadcasts against them. An all-zero
/// mask gives 0.
Tensor l1_coord_loss(const Tensor& pred, const Tensor& gt, const Tensor& mask = {});

/// Predicted edges shorter than this contribute nothing to either loss.
inline constexpr double kMinEdgeLength = 1e-9;
/// Groundtruth faces need at least this area.
inline constexpr double kMinFaceArea = 1e-10;

/// For every face and each of its three vertex pairs, |<unit(m_i - m_j), n*>|
/// where n* is the groundtruth face normal. Summed over faces, averaged over
/// the batch. Only pred receives gradients.
Tensor normal_loss(const Tensor& pred, const Tensor& gt, const std::vector<Face>& faces);

/// For every face and each of its three vertex pairs, | |m_i - m_j| - |m*_i - m*_j| |.
/// Edges shared by two faces count twice. Summed over faces, averaged over the batch.
Tensor edge_loss(const Tensor& pred, const Tensor& gt, const std::vector<Face>& faces);

struct LossWeights {
    double lambda_normal = 0.1;
    bool pose_posenet = true;
    bool pose_meshnet = true;
    bool vertex = true;
    bool normal = true;
    bool edge = true;

    void validate() const;
};

/// Scalar loss terms. Undefined terms are skipped.
struct LossParts {
    Tensor pose_posenet;
    Tensor pose_meshnet;
    Tensor vertex;
    Tensor normal;
    Tensor edge;

    /// (name, value) for each defined term, in a fixed order.
    std::vector<std::pair<std::string, double>> values() const;
};

Tensor total_loss(const LossParts& parts, const LossWeights& weights = {});

}  // namespace lixelkit::mesh
