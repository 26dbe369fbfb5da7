#include "lixelkit/meshgeom/losses.hpp"

#include <cmath>
#include <string>

#include "lixelkit/diffcore/ops.hpp"

namespace lixelkit::mesh {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Batch count and vertex count of a [V, 3] or [B, V, 3] tensor.
std::pair<std::size_t, std::size_t> batch_and_count(const Tensor& t, const char* op) {
    if (t.dim() == 2 && t.size(1) == 3) return {1, t.size(0)};
    if (t.dim() == 3 && t.size(2) == 3) return {t.size(0), t.size(1)};
    throw ShapeError(std::string(op) + ": need [V, 3] or [B, V, 3], got " + diff::to_string(t.shape()));
}

void check_pair(const Tensor& pred, const Tensor& gt, const std::vector<Face>& faces, const char* op) {
    if (pred.shape() != gt.shape()) {
        throw ShapeError(std::string(op) + ": pred " + diff::to_string(pred.shape()) + " vs gt " +
                         diff::to_string(gt.shape()));
    }
    const auto [b, v] = batch_and_count(pred, op);
    (void)b;
    if (faces.empty()) throw Error(std::string(op) + ": no faces");
    for (const auto& f : faces) {
        for (auto i : f) {
            if (i >= v) throw Error(std::string(op) + ": face index " + std::to_string(i) + " >= " + std::to_string(v));
        }
    }
    for (double x : pred.data()) {
        if (!std::isfinite(x)) throw Error(std::string(op) + ": non-finite predicted vertex");
    }
}

constexpr int kPairs[3][2] = {{0, 1}, {1, 2}, {2, 0}};

}  // namespace

Tensor l1_coord_loss(const Tensor& pred, const Tensor& gt, const Tensor& mask) {
    if (pred.shape() != gt.shape() || pred.dim() < 2 || pred.size(-1) != 3) {
        throw ShapeError("l1_coord_loss: pred " + diff::to_string(pred.shape()) + " vs gt " +
                         diff::to_string(gt.shape()));
    }
    const double batch = pred.dim() >= 3 ? static_cast<double>(pred.size(0)) : 1.0;
    auto err = diff::abs(pred - gt);
    if (mask.defined()) err = err * mask;
    return diff::sum_all(err) * (1.0 / batch);
}

Tensor normal_loss(const Tensor& pred, const Tensor& gt, const std::vector<Face>& faces) {
    check_pair(pred, gt, faces, "normal_loss");
    const auto [batch, nv] = batch_and_count(pred, "normal_loss");
    const auto pv = pred.data();
    const auto gv = gt.data();
    const std::size_t nf = faces.size();
    // Groundtruth unit normals, one per (sample, face).
    std::vector<double> normals(batch * nf * 3);
    for (std::size_t b = 0; b < batch; ++b) {
        const double* g = gv.data() + b * nv * 3;
        for (std::size_t f = 0; f < nf; ++f) {
            const double* a = g + 3 * faces[f][0];
            const double* p = g + 3 * faces[f][1];
            const double* c = g + 3 * faces[f][2];
            const double e1[3] = {p[0] - a[0], p[1] - a[1], p[2] - a[2]};
            const double e2[3] = {c[0] - a[0], c[1] - a[1], c[2] - a[2]};
            const double n[3] = {e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2],
                                 e1[0] * e2[1] - e1[1] * e2[0]};
            const double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
            if (!(0.5 * len > kMinFaceArea)) {
                throw Error("normal_loss: groundtruth face " + std::to_string(f) + " is degenerate");
            }
            for (int k = 0; k < 3; ++k) normals[(b * nf + f) * 3 + k] = n[k] / len;
        }
    }

    double total = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        const double* m = pv.data() + b * nv * 3;
        for (std::size_t f = 0; f < nf; ++f) {
            const double* n = &normals[(b * nf + f) * 3];
            for (const auto& pr : kPairs) {
                const double* mi = m + 3 * faces[f][pr[0]];
                const double* mj = m + 3 * faces[f][pr[1]];
                const double e[3] = {mi[0] - mj[0], mi[1] - mj[1], mi[2] - mj[2]};
                const double len = std::sqrt(e[0] * e[0] + e[1] * e[1] + e[2] * e[2]);
                if (len < kMinEdgeLength) continue;
                total += std::abs((e[0] * n[0] + e[1] * n[1] + e[2] * n[2]) / len);
            }
        }
    }
    const double inv_batch = 1.0 / static_cast<double>(batch);

    return diff::make_result(
        "normal_loss", {}, {total * inv_batch}, {pred},
        [faces, normals = std::move(normals), batch, nv, nf, inv_batch](diff::Node& self) {
            auto gp = diff::input_grad(self, 0);
            if (gp.empty()) return;
            const auto& m_all = self.inputs[0]->value;
            const double up = self.grad[0] * inv_batch;
            for (std::size_t b = 0; b < batch; ++b) {
                const double* m = m_all.data() + b * nv * 3;
                double* g = gp.data() + b * nv * 3;
                for (std::size_t f = 0; f < nf; ++f) {
                    const double* n = &normals[(b * nf + f) * 3];
                    for (const auto& pr : kPairs) {
                        const std::size_t i = faces[f][pr[0]], j = faces[f][pr[1]];
                        const double e[3] = {m[3 * i] - m[3 * j], m[3 * i + 1] - m[3 * j + 1], m[3 * i + 2] - m[3 * j + 2]};
                        const double len = std::sqrt(e[0] * e[0] + e[1] * e[1] + e[2] * e[2]);
                        if (len < kMinEdgeLength) continue;
                        const double un = (e[0] * n[0] + e[1] * n[1] + e[2] * n[2]) / len;
                        // d|u.n|/de = sign(u.n) (n - (u.n) u) / |e|
                        const double s = sign(un) * up / len;
                        for (int k = 0; k < 3; ++k) {
                            const double d = s * (n[k] - un * e[k] / len);
                            g[3 * i + k] += d;
                            g[3 * j + k] -= d;
                        }
                    }
                }
            }
        });
}

Tensor edge_loss(const Tensor& pred, const Tensor& gt, const std::vector<Face>& faces) {
    check_pair(pred, gt, faces, "edge_loss");
    const auto [batch, nv] = batch_and_count(pred, "edge_loss");
    const auto pv = pred.data();
    const auto gv = gt.data();
    const std::size_t nf = faces.size();
    auto length = [](const double* a, const double* b) {
        const double d[3] = {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
        return std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    };
    std::vector<double> gt_len(batch * nf * 3);
    double total = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        const double* m = pv.data() + b * nv * 3;
        const double* g = gv.data() + b * nv * 3;
        for (std::size_t f = 0; f < nf; ++f) {
            for (int p = 0; p < 3; ++p) {
                const std::size_t i = faces[f][kPairs[p][0]], j = faces[f][kPairs[p][1]];
                const double lg = length(g + 3 * i, g + 3 * j);
                gt_len[(b * nf + f) * 3 + p] = lg;
                total += std::abs(length(m + 3 * i, m + 3 * j) - lg);
            }
        }
    }
    const double inv_batch = 1.0 / static_cast<double>(batch);

    return diff::make_result(
        "edge_loss", {}, {total * inv_batch}, {pred},
        [faces, gt_len = std::move(gt_len), batch, nv, nf, inv_batch](diff::Node& self) {
            auto gp = diff::input_grad(self, 0);
            if (gp.empty()) return;
            const auto& m_all = self.inputs[0]->value;
            const double up = self.grad[0] * inv_batch;
            for (std::size_t b = 0; b < batch; ++b) {
                const double* m = m_all.data() + b * nv * 3;
                double* g = gp.data() + b * nv * 3;
                for (std::size_t f = 0; f < nf; ++f) {
                    for (int p = 0; p < 3; ++p) {
                        const std::size_t i = faces[f][kPairs[p][0]], j = faces[f][kPairs[p][1]];
                        const double e[3] = {m[3 * i] - m[3 * j], m[3 * i + 1] - m[3 * j + 1], m[3 * i + 2] - m[3 * j + 2]};
                        const double len = std::sqrt(e[0] * e[0] + e[1] * e[1] + e[2] * e[2]);
                        if (len < kMinEdgeLength) continue;
                        const double s = sign(len - gt_len[(b * nf + f) * 3 + p]) * up / len;
                        for (int k = 0; k < 3; ++k) {
                            g[3 * i + k] += s * e[k];
                            g[3 * j + k] -= s * e[k];
                        }
                    }
                }
            }
        });
}

void LossWeights::validate() const {
    if (!(lambda_normal >= 0.0) || !std::isfinite(lambda_normal)) {
        throw Error("loss weights: lambda_normal must be finite and >= 0, got " + std::to_string(lambda_normal));
    }
}

std::vector<std::pair<std::string, double>> LossParts::values() const {
    std::vector<std::pair<std::string, double>> out;
    auto add = [&](const char* name, const Tensor& t) {
        if (t.defined()) out.emplace_back(name, t.item());
    };
    add("pose_posenet", pose_posenet);
    add("pose_meshnet", pose_meshnet);
    add("vertex", vertex);
    add("normal", normal);
    add("edge", edge);
    return out;
}

Tensor total_loss(const LossParts& parts, const LossWeights& weights) {
    weights.validate();
    Tensor total = Tensor::scalar(0.0);
    auto add = [&](const char* name, const Tensor& t, bool on, double w) {
        if (!on || !t.defined()) return;
        if (t.numel() != 1) throw ShapeError(std::string("total_loss: term ") + name + " is not scalar");
        if (!std::isfinite(t.item())) throw Error(std::string("total_loss: term ") + name + " is not finite");
        total = total + (w == 1.0 ? t : t * w);
    };
    add("pose_posenet", parts.pose_posenet, weights.pose_posenet, 1.0);
    add("pose_meshnet", parts.pose_meshnet, weights.pose_meshnet, 1.0);
    add("vertex", parts.vertex, weights.vertex, 1.0);
    add("normal", parts.normal, weights.normal, weights.lambda_normal);
    add("edge", parts.edge, weights.edge, 1.0);
    return total;
}

}  // namespace lixelkit::mesh
