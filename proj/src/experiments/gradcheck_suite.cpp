#include "lixelkit/experiments/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>

#include "lixelkit/camera/camera.hpp"
#include "lixelkit/diffcore/batch_norm.hpp"
#include "lixelkit/diffcore/conv.hpp"
#include "lixelkit/diffcore/grad_check.hpp"
#include "lixelkit/diffcore/ops.hpp"
#include "lixelkit/diffcore/rng.hpp"
#include "lixelkit/experiments/dataset.hpp"
#include "lixelkit/experiments/template.hpp"
#include "lixelkit/meshgeom/losses.hpp"

namespace lixelkit::exp {

namespace {

using diff::Rng;
using Fn = std::function<Tensor(const Tensor&)>;

Tensor rand(Rng& r, diff::Shape s, double lo = -1.0, double hi = 1.0) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    std::vector<double> v(n);
    for (auto& x : v) x = r.uniform(lo, hi);
    return Tensor::from(std::move(s), std::move(v));
}

// Magnitudes in [lo, hi] with random sign: keeps kinks at zero out of reach.
Tensor away_from_zero(Rng& r, diff::Shape s, double lo = 0.2, double hi = 1.0) {
    auto t = rand(r, std::move(s), lo, hi);
    for (auto& x : t.mutable_data())
        if (r.uniform() < 0.5) x = -x;
    return t;
}

// Contracts an arbitrary output with fixed random weights.
Fn weighted(Rng& r, std::function<Tensor(const Tensor&)> op, const Tensor& probe_input) {
    const auto shape = op(probe_input).shape();
    const auto w = rand(r, shape);
    return [op, w](const Tensor& x) { return diff::sum_all(op(x) * w); };
}

struct Suite {
    std::uint64_t seed;
    Rng rng;
    std::vector<GradCheckCase>& out;
    const std::function<void(const GradCheckCase&)>& on_case;

    void check(const std::string& name, const Fn& f, const Tensor& x, double eps = 1e-6) {
        record(name, diff::grad_check(f, x, eps));
    }
    void check_op(const std::string& name, const Fn& op, const Tensor& x) { check(name, weighted(rng, op, x), x); }
    void record(const std::string& name, double err) {
        out.push_back({name, seed, err});
        if (on_case) on_case(out.back());
    }
};

void primitive_ops(Suite& s) {
    auto& r = s.rng;
    const auto a = rand(r, {3, 4}), b = rand(r, {3, 4}), row = rand(r, {1, 4});
    const auto pos = rand(r, {3, 4}, 0.5, 2.0);
    s.check_op("add", [&](const Tensor& x) { return x + row; }, a);
    s.check_op("add_broadcast", [&](const Tensor& x) { return a + x; }, row);
    s.check_op("sub", [&](const Tensor& x) { return b - x; }, a);
    s.check_op("mul", [&](const Tensor& x) { return x * b; }, a);
    s.check_op("mul_broadcast", [&](const Tensor& x) { return a * x; }, row);
    s.check_op("div_numerator", [&](const Tensor& x) { return x / pos; }, a);
    s.check_op("div_denominator", [&](const Tensor& x) { return b / x; }, pos);
    s.check_op("add_scalar", [](const Tensor& x) { return x + 0.7; }, a);
    s.check_op("mul_scalar", [](const Tensor& x) { return x * -1.3; }, a);
    s.check_op("neg", [](const Tensor& x) { return -x; }, a);
    s.check_op("exp", [](const Tensor& x) { return diff::exp(x); }, a);
    s.check_op("abs", [](const Tensor& x) { return diff::abs(x); }, away_from_zero(r, {3, 4}));
    s.check_op("sqrt", [](const Tensor& x) { return diff::sqrt(x); }, pos);
    s.check_op("relu", [](const Tensor& x) { return diff::relu(x); }, away_from_zero(r, {3, 4}));
    s.check_op("sin", [](const Tensor& x) { return diff::sin(x); }, a);
    s.check_op("cos", [](const Tensor& x) { return diff::cos(x); }, a);

    const auto m = rand(r, {4, 5}), bm = rand(r, {2, 4, 5});
    s.check_op("matmul_lhs", [&](const Tensor& x) { return diff::matmul(x, m); }, a);
    s.check_op("matmul_rhs", [&](const Tensor& x) { return diff::matmul(a, x); }, m);
    const auto ba = rand(r, {2, 3, 4});
    s.check_op("matmul_batched", [&](const Tensor& x) { return diff::matmul(x, bm); }, ba);
    s.check_op("matmul_batched_rhs", [&](const Tensor& x) { return diff::matmul(ba, x); }, bm);
    const auto lw = rand(r, {5, 4}), lb = rand(r, {5});
    s.check_op("linear_input", [&](const Tensor& x) { return diff::linear(x, lw, lb); }, a);
    s.check_op("linear_weight", [&](const Tensor& x) { return diff::linear(a, x, lb); }, lw);
    s.check_op("linear_bias", [&](const Tensor& x) { return diff::linear(a, lw, x); }, lb);

    const auto t3 = rand(r, {2, 3, 4});
    for (int axis = 0; axis < 3; ++axis) {
        const auto k = std::to_string(axis);
        s.check_op("sum_axis" + k, [axis](const Tensor& x) { return diff::sum(x, axis, axis == 1); }, t3);
        s.check_op("mean_axis" + k, [axis](const Tensor& x) { return diff::mean(x, axis); }, t3);
        s.check_op("max_axis" + k, [axis](const Tensor& x) { return diff::max(x, axis, axis == 2); }, t3);
        s.check_op("softmax_axis" + k, [axis](const Tensor& x) { return diff::softmax(x * 3.0, axis); }, t3);
        s.check_op("l2_norm_axis" + k, [axis](const Tensor& x) { return diff::l2_norm(x, axis); }, t3);
    }
    s.check("sum_all", [](const Tensor& x) { return diff::sum_all(x * x); }, t3);
    s.check("mean_all", [](const Tensor& x) { return diff::mean_all(diff::exp(x)); }, t3);
    s.check_op("concat", [&](const Tensor& x) { return diff::concat({x, t3 * 2.0, x * x}, 1); }, t3);
    s.check_op("stack", [&](const Tensor& x) {
        const Tensor parts[] = {x, x * x};
        return diff::stack(parts, 2);
    }, t3);
    s.check_op("reshape", [](const Tensor& x) { return diff::reshape(x, {4, 6}) * diff::reshape(x, {4, 6}); }, t3);
    s.check_op("narrow", [](const Tensor& x) { return diff::narrow(x, 2, 1, 2) * 1.5; }, t3);
}

void layer_ops(Suite& s) {
    auto& r = s.rng;
    const auto x = rand(r, {2, 3, 5, 4}), w = rand(r, {4, 3, 3, 3}), bias = rand(r, {4});
    const auto opt = diff::Conv2dOptions::uniform(2, 1);
    s.check_op("conv2d_input", [&](const Tensor& t) { return diff::conv2d(t, w, bias, opt); }, x);
    s.check_op("conv2d_weight", [&](const Tensor& t) { return diff::conv2d(x, t, bias, opt); }, w);
    s.check_op("conv2d_bias", [&](const Tensor& t) { return diff::conv2d(x, w, t, opt); }, bias);
    const auto wt = rand(r, {3, 2, 4, 4}), bt = rand(r, {2});
    s.check_op("conv_transpose2d_input", [&](const Tensor& t) { return diff::conv_transpose2d(t, wt, bt, opt); }, x);
    s.check_op("conv_transpose2d_weight", [&](const Tensor& t) { return diff::conv_transpose2d(x, t, bt, opt); }, wt);
    const auto x1 = rand(r, {2, 3, 6}), w1 = rand(r, {2, 3, 3}), wt1 = rand(r, {3, 2, 4});
    s.check_op("conv1d_input", [&](const Tensor& t) { return diff::conv1d(t, w1, {}, 1, 1); }, x1);
    s.check_op("conv1d_weight", [&](const Tensor& t) { return diff::conv1d(x1, t, {}, 2, 1); }, w1);
    s.check_op("conv_transpose1d_input", [&](const Tensor& t) { return diff::conv_transpose1d(t, wt1, {}, 2, 1); }, x1);
    s.check_op("conv_transpose1d_weight", [&](const Tensor& t) { return diff::conv_transpose1d(x1, t, {}, 2, 1); }, wt1);
    const auto gamma = rand(r, {3}, 0.5, 1.5), beta = rand(r, {3});
    s.check_op("batch_norm_input", [&](const Tensor& t) {
        auto st = diff::BatchNormStats::fresh(3);
        return diff::batch_norm(t, gamma, beta, st, true);
    }, x);
    s.check_op("batch_norm_gamma", [&](const Tensor& t) {
        auto st = diff::BatchNormStats::fresh(3);
        return diff::batch_norm(x, t, beta, st, true);
    }, gamma);
}

std::vector<mesh::Vec3> jitter(const std::vector<mesh::Vec3>& v, Rng& r, double sd) {
    auto out = v;
    for (auto& p : out)
        for (auto& c : p) c += r.normal(0.0, sd);
    return out;
}

void losses(Suite& s, const ToyTemplate& tmpl) {
    auto& r = s.rng;
    // Rest mesh in cell-like units, two noisy copies per batch.
    auto scaled = tmpl.rest.vertices;
    for (auto& p : scaled)
        for (auto& c : p) c *= 0.01;
    std::vector<double> pv, gv;
    for (int b = 0; b < 2; ++b) {
        for (const auto& p : jitter(scaled, r, 0.05)) pv.insert(pv.end(), p.begin(), p.end());
        for (const auto& p : jitter(scaled, r, 0.05)) gv.insert(gv.end(), p.begin(), p.end());
    }
    const std::size_t nv = scaled.size();
    const auto pred = Tensor::from({2, nv, 3}, pv), gt = Tensor::from({2, nv, 3}, gv);
    auto mask = rand(r, {2, nv, 3}, 0.0, 1.0);
    for (auto& m : mask.mutable_data()) m = m < 0.3 ? 0.0 : 1.0;
    s.check("l1_coord_loss", [&](const Tensor& x) { return mesh::l1_coord_loss(x, gt, mask); }, pred);
    s.check("normal_loss", [&](const Tensor& x) { return mesh::normal_loss(x, gt, tmpl.rest.faces); }, pred);
    s.check("edge_loss", [&](const Tensor& x) { return mesh::edge_loss(x, gt, tmpl.rest.faces); }, pred);
    const auto joints_gt = mesh::regress_joints(tmpl.regressor, gt);
    s.check("total_loss", [&](const Tensor& x) {
        mesh::LossParts p;
        p.pose_meshnet = mesh::l1_coord_loss(mesh::regress_joints(tmpl.regressor, x), joints_gt);
        p.vertex = mesh::l1_coord_loss(x, gt);
        p.normal = mesh::normal_loss(x, gt, tmpl.rest.faces);
        p.edge = mesh::edge_loss(x, gt, tmpl.rest.faces);
        return mesh::total_loss(p);
    }, pred);
}

void heatmaps(Suite& s) {
    auto& r = s.rng;
    const heatmap::HeatmapLayout layout{heatmap::LayoutKind::voxel_xyz, 6, 5, 4};
    const auto coords = rand(r, {2, 3, 3}, 0.5, 3.5);
    s.check_op("render_gaussian_3d", [&](const Tensor& c) { return heatmap::render_gaussian_3d(c, layout, 1.5); }, coords);
    s.check_op("render_gaussian_1d", [&](const Tensor& c) { return heatmap::render_gaussian_1d(c, 7, 2.0); },
               rand(r, {2, 3}, 0.0, 6.0));
    s.check_op("soft_argmax_1d", [](const Tensor& l) { return heatmap::soft_argmax_1d(l * 2.0); }, rand(r, {2, 3, 8}));
    const auto ly = rand(r, {2, 3, 5}), lz = rand(r, {2, 3, 4});
    s.check_op("decode", [&](const Tensor& lx) {
        return heatmap::decode(heatmap::LixelHeatmapSet::from_logits(lx, ly * 2.0, lz)).xyz;
    }, rand(r, {2, 3, 6}));
    s.check_op("normalize_rows", [](const Tensor& v) { return heatmap::normalize_rows(v); }, rand(r, {2, 5}, 0.2, 1.0));
    const auto feat = rand(r, {2, 3, 5, 4});
    const auto wx = rand(r, {4}), wy = rand(r, {5});
    using heatmap::MarginalAxis;
    using heatmap::MarginalMethod;
    for (auto m : {MarginalMethod::avg, MarginalMethod::max}) {
        const auto n = heatmap::to_string(m);
        s.check_op("marginalize_x_" + n, [m](const Tensor& f) { return heatmap::marginalize(f, MarginalAxis::x, m); }, feat);
        s.check_op("marginalize_xy_" + n, [m](const Tensor& f) { return heatmap::marginalize(f, MarginalAxis::xy, m); }, feat);
    }
    s.check_op("marginalize_x_weighted_sum_feature", [&](const Tensor& f) {
        return heatmap::marginalize(f, MarginalAxis::x, MarginalMethod::weighted_sum, wx);
    }, feat);
    s.check_op("marginalize_y_weighted_sum_weights", [&](const Tensor& w) {
        return heatmap::marginalize(feat, MarginalAxis::y, MarginalMethod::weighted_sum, w);
    }, wy);
}

void geometry(Suite& s, const ToyTemplate& tmpl) {
    auto& r = s.rng;
    camera::CameraFrame f;
    f.fx = r.uniform(800, 1500);
    f.fy = f.fx * r.uniform(0.95, 1.05);
    f.cx = r.uniform(400, 600);
    f.cy = r.uniform(400, 600);
    const double sc = r.uniform(0.05, 0.2);
    f.affine = {sc, r.uniform(-0.01, 0.01), r.uniform(-20, 20), r.uniform(-0.01, 0.01), sc, r.uniform(-20, 20)};
    f.root_depth = r.uniform(3000, 6000);
    const heatmap::HeatmapLayout layout{heatmap::LayoutKind::lixel_xyz, 16, 16, 16};
    s.check_op("recover_mesh", [&](const Tensor& c) { return camera::recover_mesh(c, f, layout); }, rand(r, {5, 3}, 1.0, 15.0));
    auto pts = rand(r, {5, 3}, -300.0, 300.0);
    for (std::size_t i = 0; i < 5; ++i) pts.mutable_data()[i * 3 + 2] += f.root_depth;
    s.check_op("encode_to_cells", [&](const Tensor& p) { return camera::encode_to_cells(p, f, layout); }, pts);
    s.check_op("axis_angle_to_matrix", [](const Tensor& w) { return axis_angle_to_matrix(w); }, rand(r, {3, 3}, -2.0, 2.0));
    s.check_op("pose_template", [&](const Tensor& w) { return pose_template(tmpl, w).vertices * 1e-3; },
               rand(r, {1, tmpl.joints(), 3}, -0.8, 0.8));
}

net::NetConfig tiny(const ToyTemplate& tmpl, net::Cascade cascade) {
    net::NetConfig c;
    c.joints = tmpl.joints();
    c.vertices = tmpl.vertices();
    c.in_channels = tmpl.joints();
    c.depth = 8;
    c.deep_h = c.deep_w = 1;
    c.stem_channels = 4;
    c.trunk_channels = {4, 6, 8};
    c.head_channels = 4;
    c.fuse_channels = 4;
    c.fc_hidden = 8;
    c.cascade = cascade;
    return c;
}

void network(Suite& s, const ToyTemplate& tmpl) {
    auto& r = s.rng;
    DatasetOptions o;
    o.count = 3;
    o.seed = s.seed;
    o.input_width = o.input_height = 16;
    o.layout = {heatmap::LayoutKind::lixel_xyz, 8, 8, 8};
    const auto data = generate_dataset(tmpl, o);
    const auto batch = make_batch(data, {0, 1, 2});
    for (auto mode : {net::Cascade::mesh_only, net::Cascade::pose_then_mesh, net::Cascade::gt_pose_to_mesh}) {
        net::Model model(tiny(tmpl, mode), tmpl.topology(), s.seed);
        // Under pose_then_mesh the rendered joint heatmaps are cut from the
        // graph, so finite differences through PoseNet see a path the
        // analytic gradient deliberately lacks; those parameters are checked
        // against the PoseNet loss alone.
        std::vector<diff::Probe> probes, pose_probes;
        for (auto& p : model.params().params()) {
            const bool pose_side = p.group != net::kMeshGroup;
            auto& dst = (mode == net::Cascade::pose_then_mesh && pose_side) ? pose_probes : probes;
            for (int k = 0; k < 2; ++k) dst.push_back({p.value, r.index(p.value.numel())});
        }
        const auto name = "forward_full_" + net::to_string(mode);
        s.record(name, diff::grad_check_probes([&] { return model.forward(batch, true).total; }, probes));
        if (!pose_probes.empty()) {
            mesh::LossWeights only_pose;
            only_pose.pose_meshnet = only_pose.vertex = only_pose.normal = only_pose.edge = false;
            s.record(name + "_posenet_loss",
                     diff::grad_check_probes([&] { return model.forward(batch, true, only_pose).total; }, pose_probes));
        }
    }
}

}  // namespace

double GradCheckReport::worst() const {
    double w = 0.0;
    for (const auto& c : cases) w = std::max(w, c.max_error);
    return w;
}

std::vector<GradCheckCase> GradCheckReport::per_name() const {
    std::vector<GradCheckCase> out;
    for (const auto& c : cases) {
        auto it = std::find_if(out.begin(), out.end(), [&](const GradCheckCase& o) { return o.name == c.name; });
        if (it == out.end())
            out.push_back(c);
        else if (c.max_error > it->max_error)
            *it = c;
    }
    return out;
}

GradCheckReport run_gradcheck_suite(std::size_t seeds, const std::function<void(const GradCheckCase&)>& on_case) {
    GradCheckReport report;
    const auto tmpl = make_toy_template();
    for (std::size_t k = 0; k < seeds; ++k) {
        const std::uint64_t seed = 1000 + k;
        Suite s{seed, Rng(seed), report.cases, on_case};
        primitive_ops(s);
        layer_ops(s);
        losses(s, tmpl);
        heatmaps(s);
        geometry(s, tmpl);
        network(s, tmpl);
    }
    return report;
}

}  // namespace lixelkit::exp
