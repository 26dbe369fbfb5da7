#include "lixelkit/meshgeom/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

namespace lixelkit::mesh {

namespace {

void check_sets(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt, const char* op) {
    if (pred.size() != gt.size()) {
        throw ShapeError(std::string(op) + ": " + std::to_string(pred.size()) + " predicted vs " +
                         std::to_string(gt.size()) + " groundtruth joints");
    }
    for (const auto* set : {&pred, &gt})
        for (const auto& p : *set)
            for (double v : p)
                if (!std::isfinite(v)) throw Error(std::string(op) + ": non-finite coordinate");
}

double dist(const Vec3& a, const Vec3& b) {
    return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

Eigen::MatrixX3d as_matrix(const std::vector<Vec3>& pts) {
    Eigen::MatrixX3d m(static_cast<Eigen::Index>(pts.size()), 3);
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (int k = 0; k < 3; ++k) m(static_cast<Eigen::Index>(i), k) = pts[i][k];
    return m;
}

}  // namespace

double mpjpe(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt, std::size_t root) {
    check_sets(pred, gt, "mpjpe");
    if (pred.size() < 2) throw Error("mpjpe: need at least 2 joints");
    if (root >= pred.size()) throw Error("mpjpe: root index " + std::to_string(root) + " out of range");
    double total = 0.0;
    for (std::size_t j = 0; j < pred.size(); ++j) {
        const Vec3 a{pred[j][0] - pred[root][0], pred[j][1] - pred[root][1], pred[j][2] - pred[root][2]};
        const Vec3 b{gt[j][0] - gt[root][0], gt[j][1] - gt[root][1], gt[j][2] - gt[root][2]};
        total += dist(a, b);
    }
    return total / static_cast<double>(pred.size());
}

Vec3 Alignment::apply(const Vec3& p) const {
    Vec3 out{};
    for (int r = 0; r < 3; ++r)
        out[r] = scale * (rotation[3 * r] * p[0] + rotation[3 * r + 1] * p[1] + rotation[3 * r + 2] * p[2]) +
                 translation[r];
    return out;
}

Alignment procrustes(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt, bool with_scale) {
    check_sets(pred, gt, "procrustes");
    if (pred.size() < 3) throw Error("procrustes: need at least 3 joints");
    const Eigen::MatrixX3d x = as_matrix(pred);
    const Eigen::MatrixX3d y = as_matrix(gt);
    const Eigen::RowVector3d mx = x.colwise().mean();
    const Eigen::RowVector3d my = y.colwise().mean();
    const Eigen::MatrixX3d xc = x.rowwise() - mx;
    const Eigen::MatrixX3d yc = y.rowwise() - my;

    Eigen::JacobiSVD<Eigen::Matrix3d> gsvd(yc.transpose() * yc);
    const auto gs = gsvd.singularValues();
    if (!(gs(1) > 1e-12 * std::max(1.0, gs(0)))) throw Error("procrustes: groundtruth points are collinear");
    const double var_x = xc.squaredNorm();
    if (!(var_x > 1e-24)) throw Error("procrustes: predicted points coincide");

    // Rotation maximizing trace(R * H), H = sum x_i y_i^T.
    const Eigen::Matrix3d h = xc.transpose() * yc;
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (!svd.singularValues().allFinite()) throw Error("procrustes: SVD failed");
    const Eigen::Matrix3d u = svd.matrixU();
    const Eigen::Matrix3d v = svd.matrixV();
    Eigen::Vector3d d(1.0, 1.0, (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0);
    const Eigen::Matrix3d rot = v * d.asDiagonal() * u.transpose();
    const double s = with_scale ? (svd.singularValues().cwiseProduct(d)).sum() / var_x : 1.0;
    const Eigen::Vector3d t = my.transpose() - s * rot * mx.transpose();

    Alignment a;
    a.scale = s;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) a.rotation[3 * r + c] = rot(r, c);
        a.translation[r] = t(r);
    }
    return a;
}

double pa_mpjpe(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt, bool with_scale) {
    const Alignment a = procrustes(pred, gt, with_scale);
    double total = 0.0;
    for (std::size_t j = 0; j < pred.size(); ++j) total += dist(a.apply(pred[j]), gt[j]);
    return total / static_cast<double>(pred.size());
}

}  // namespace lixelkit::mesh
