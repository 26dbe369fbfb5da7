#include "lixelkit/experiments/template.hpp"

#include <cmath>

#include "lixelkit/diffcore/ops.hpp"

namespace lixelkit::exp {

namespace {

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
Vec3 unit(const Vec3& a) {
    const double n = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
    return {a[0] / n, a[1] / n, a[2] / n};
}

// Appends a capsule from a to b and returns the index of its first vertex.
// Layout: rings x segments side vertices, then the cap at a, then the cap at b.
std::uint32_t add_capsule(mesh::TriMesh& m, const Vec3& a, const Vec3& b, const TemplateOptions& o) {
    const auto base = static_cast<std::uint32_t>(m.vertices.size());
    const Vec3 d = unit(sub(b, a));
    const Vec3 helper = std::abs(d[2]) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
    const Vec3 u = unit(cross(d, helper));
    const Vec3 v = cross(d, u);
    const auto segs = static_cast<std::uint32_t>(o.ring_segments);
    const auto rings = static_cast<std::uint32_t>(o.rings);
    for (std::uint32_t r = 0; r < rings; ++r) {
        const double t = static_cast<double>(r) / static_cast<double>(rings - 1);
        for (std::uint32_t k = 0; k < segs; ++k) {
            const double th = 2.0 * M_PI * k / segs;
            Vec3 p;
            for (int c = 0; c < 3; ++c)
                p[c] = a[c] + t * (b[c] - a[c]) + o.radius * (std::cos(th) * u[c] + std::sin(th) * v[c]);
            m.vertices.push_back(p);
        }
    }
    const std::uint32_t cap_a = base + rings * segs, cap_b = cap_a + 1;
    m.vertices.push_back({a[0] - o.radius * d[0], a[1] - o.radius * d[1], a[2] - o.radius * d[2]});
    m.vertices.push_back({b[0] + o.radius * d[0], b[1] + o.radius * d[1], b[2] + o.radius * d[2]});
    auto at = [&](std::uint32_t r, std::uint32_t k) { return base + r * segs + k % segs; };
    // (u, v, d) is right-handed, so increasing k runs counter-clockwise seen from +d.
    for (std::uint32_t r = 0; r + 1 < rings; ++r)
        for (std::uint32_t k = 0; k < segs; ++k) {
            m.faces.push_back({at(r, k), at(r, k + 1), at(r + 1, k + 1)});
            m.faces.push_back({at(r, k), at(r + 1, k + 1), at(r + 1, k)});
        }
    for (std::uint32_t k = 0; k < segs; ++k) {
        m.faces.push_back({cap_a, at(0, k + 1), at(0, k)});
        m.faces.push_back({cap_b, at(rings - 1, k), at(rings - 1, k + 1)});
    }
    return base;
}

}  // namespace

ToyTemplate make_toy_template(const TemplateOptions& o) {
    if (o.ring_segments < 3 || o.rings < 2 || !(o.radius > 0.0)) throw Error("template: bad capsule options");
    ToyTemplate t;
    t.parents = {-1, 0, 1, 1, 1, 0, 0, 5};
    t.rest_joints = {{0, 0, 0},      {0, -300, 0},  {0, -500, 0},  {-350, -250, 0},
                     {350, -250, 0}, {-120, 350, 0}, {120, 350, 0}, {-120, 650, 0}};
    const std::size_t nj = t.parents.size();
    const std::size_t per = o.rings * o.ring_segments + 2;
    const std::size_t nv = (nj - 1) * per;
    t.regressor = {nj, nv, std::vector<double>(nj * nv, 0.0)};
    std::vector<std::size_t> root_rings;
    for (std::size_t j = 1; j < nj; ++j) {
        const auto p = static_cast<std::size_t>(t.parents[j]);
        const std::uint32_t base = add_capsule(t.rest, t.rest_joints[p], t.rest_joints[j], o);
        for (std::size_t k = 0; k < per; ++k) {
            t.vertex_joint.push_back(p);
            t.vertex_bone.push_back(j);
        }
        // Joint j: centroid of the ring sitting on it.
        const std::size_t last = base + (o.rings - 1) * o.ring_segments;
        for (std::size_t k = 0; k < o.ring_segments; ++k) t.regressor.weights[j * nv + last + k] = 1.0;
        if (p == 0)
            for (std::size_t k = 0; k < o.ring_segments; ++k) root_rings.push_back(base + k);
    }
    for (auto i : root_rings) t.regressor.weights[i] = 1.0;
    for (std::size_t j = 0; j < nj; ++j) {
        double s = 0.0;
        for (std::size_t v = 0; v < nv; ++v) s += t.regressor.weights[j * nv + v];
        for (std::size_t v = 0; v < nv; ++v) t.regressor.weights[j * nv + v] /= s;
    }
    t.rest.validate();
    t.regressor.validate();
    return t;
}

Tensor axis_angle_to_matrix(const Tensor& w) {
    if (w.dim() < 1 || w.size(-1) != 3) throw ShapeError("axis_angle_to_matrix: need [..., 3], got " + diff::to_string(w.shape()));
    diff::Shape lead = w.shape();
    lead.pop_back();
    // theta = sqrt(|w|^2 + eps^2) keeps sin(theta)/theta and its gradient finite at w = 0.
    const auto theta = diff::sqrt(diff::sum(w * w, -1, true) + 1e-12);
    const auto a = diff::sin(theta) / theta;
    const auto b = (-diff::cos(theta) + 1.0) / (theta * theta);
    auto comp = [&](std::size_t k) { return diff::narrow(w, -1, k, 1); };
    const auto x = comp(0), y = comp(1), z = comp(2);
    // K = [[0,-z,y],[z,0,-x],[-y,x,0]]; K^2 = w w^T - |w|^2 I with |w|^2 the unsmoothed norm.
    const auto xx = x * x, yy = y * y, zz = z * z, xy = x * y, xz = x * z, yz = y * z;
    const auto n2 = xx + yy + zz;
    const std::vector<Tensor> entries = {
        b * (xx - n2) + 1.0, a * (-z) + b * xy,   a * y + b * xz,
        a * z + b * xy,      b * (yy - n2) + 1.0, a * (-x) + b * yz,
        a * (-y) + b * xz,   a * x + b * yz,      b * (zz - n2) + 1.0};
    diff::Shape out = lead;
    out.push_back(3);
    out.push_back(3);
    return diff::reshape(diff::concat(std::span<const Tensor>(entries), -1), out);
}

PosedMesh pose_template(const ToyTemplate& t, const Tensor& axis_angle) {
    const std::size_t nj = t.joints();
    if (axis_angle.dim() != 3 || axis_angle.size(1) != nj || axis_angle.size(2) != 3) {
        throw ShapeError("pose_template: need [B, " + std::to_string(nj) + ", 3], got " +
                         diff::to_string(axis_angle.shape()));
    }
    const std::size_t batch = axis_angle.size(0);
    const auto local = axis_angle_to_matrix(axis_angle);  // [B, J, 3, 3]
    auto local_t = [&](std::size_t j) {
        // Transpose of R_j, read off with reshapes: R^T[r][c] = R[c][r].
        auto r = diff::reshape(diff::narrow(local, 1, j, 1), {batch, 9});
        std::vector<Tensor> e;
        for (int row = 0; row < 3; ++row)
            for (int c = 0; c < 3; ++c) e.push_back(diff::narrow(r, 1, static_cast<std::size_t>(c * 3 + row), 1));
        return diff::reshape(diff::concat(std::span<const Tensor>(e), 1), {batch, 3, 3});
    };

    // Row-vector convention: a point p maps to p * G^T with G the global rotation.
    std::vector<Tensor> global_t(nj), joint_pos(nj);
    global_t[0] = local_t(0);
    joint_pos[0] = diff::Tensor::zeros({batch, 1, 3});
    for (std::size_t j = 1; j < nj; ++j) {
        const auto p = static_cast<std::size_t>(t.parents[j]);
        const Vec3 off{t.rest_joints[j][0] - t.rest_joints[p][0], t.rest_joints[j][1] - t.rest_joints[p][1],
                       t.rest_joints[j][2] - t.rest_joints[p][2]};
        joint_pos[j] = joint_pos[p] + diff::matmul(diff::Tensor::from({1, 3}, {off[0], off[1], off[2]}), global_t[p]);
        global_t[j] = diff::matmul(local_t(j), global_t[p]);
    }

    std::vector<Tensor> segments;
    std::size_t start = 0;
    while (start < t.vertices()) {
        std::size_t end = start;
        while (end < t.vertices() && t.vertex_bone[end] == t.vertex_bone[start]) ++end;
        const std::size_t p = t.vertex_joint[start];
        std::vector<double> rel;
        for (std::size_t v = start; v < end; ++v)
            for (int c = 0; c < 3; ++c) rel.push_back(t.rest.vertices[v][c] - t.rest_joints[p][c]);
        const auto rest_rel = diff::Tensor::from({end - start, 3}, std::move(rel));
        segments.push_back(joint_pos[p] + diff::matmul(rest_rel, global_t[p]));
        start = end;
    }
    return {diff::concat(std::span<const Tensor>(segments), 1), diff::concat(std::span<const Tensor>(joint_pos), 1)};
}

}  // namespace lixelkit::exp
