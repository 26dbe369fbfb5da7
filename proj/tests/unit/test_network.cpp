#include <gtest/gtest.h>

#include <cmath>

#include "lixelkit/diffcore/graph.hpp"
#include "lixelkit/diffcore/grad_check.hpp"
#include "lixelkit/diffcore/ops.hpp"
#include "lixelkit/network/model.hpp"

using namespace lixelkit;
using namespace lixelkit::net;
using diff::Rng;

namespace {

// Octahedron with two joints, each the mean of three vertices.
MeshTopology octahedron() {
    MeshTopology t;
    t.faces = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4}, {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
    t.regressor = {2, 6, {1.0 / 3, 0, 1.0 / 3, 0, 1.0 / 3, 0, 0, 1.0 / 3, 0, 1.0 / 3, 0, 1.0 / 3}};
    return t;
}

NetConfig tiny(Cascade cascade = Cascade::pose_then_mesh) {
    NetConfig c;
    c.joints = 2;
    c.vertices = 6;
    c.depth = 8;
    c.deep_h = c.deep_w = 1;
    c.in_channels = 2;
    c.stem_channels = 4;
    c.trunk_channels = {4, 6, 8};
    c.head_channels = 4;
    c.fuse_channels = 4;
    c.fc_hidden = 8;
    c.cascade = cascade;
    return c;
}

Batch random_batch(const NetConfig& c, const MeshTopology& topo, std::size_t b, std::uint64_t seed) {
    Rng r(seed);
    Batch batch;
    std::vector<double> img(b * c.in_channels * c.input_h() * c.input_w());
    for (auto& v : img) v = r.uniform(0, 1);
    batch.image = diff::Tensor::from({b, c.in_channels, c.input_h(), c.input_w()}, img);
    const double base[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    std::vector<double> mesh;
    for (std::size_t s = 0; s < b; ++s) {
        const double cx = r.uniform(3, 5), cy = r.uniform(3, 5), cz = r.uniform(3, 5), sc = r.uniform(1.5, 2.5);
        for (auto& v : base) {
            mesh.insert(mesh.end(), {cx + sc * v[0] + r.normal(0, 0.1), cy + sc * v[1] + r.normal(0, 0.1),
                                     cz + sc * v[2] + r.normal(0, 0.1)});
        }
    }
    batch.mesh = diff::Tensor::from({b, c.vertices, 3}, mesh);
    batch.joints = mesh::regress_joints(topo.regressor, batch.mesh);
    return batch;
}

bool all_zero(std::span<const double> g) {
    for (double v : g)
        if (v != 0.0) return false;
    return true;
}

std::vector<diff::Probe> probes_for(Model& m, const std::string& group, std::size_t per_param, Rng& r) {
    std::vector<diff::Probe> out;
    for (auto& p : m.params().params()) {
        if (!group.empty() && p.group != group) continue;
        for (std::size_t k = 0; k < per_param; ++k) out.push_back({p.value, r.index(p.value.numel())});
    }
    return out;
}

}  // namespace

TEST(Backbone, StrideArithmeticAtDefaultScale) {
    NetConfig c;
    c.vertices = 6;
    c.joints = 2;
    c.in_channels = 8;
    Model m(c, octahedron(), 1);
    auto batch = random_batch(tiny(), octahedron(), 2, 0);
    batch.image = diff::Tensor::zeros({2, 8, 64, 64});
    auto early = m.stem(batch.image, true);
    EXPECT_EQ(early.shape(), (diff::Shape{2, 16, 32, 32}));
    auto pose = m.pose(early, batch, true);
    EXPECT_EQ(pose.heatmaps.hx.shape(), (diff::Shape{2, 2, 32}));
    EXPECT_EQ(pose.heatmaps.hy.shape(), (diff::Shape{2, 2, 32}));
    EXPECT_EQ(pose.heatmaps.hz.shape(), (diff::Shape{2, 2, 32}));
    auto fused = m.fuse(pose.coords, early, true);
    auto out = m.mesh(fused, batch, true);
    EXPECT_EQ(out.heatmaps.hx.shape(), (diff::Shape{2, 6, 32}));
    EXPECT_EQ(out.coords.shape(), (diff::Shape{2, 6, 3}));
}

TEST(Backbone, RejectsIndivisibleOrMismatchedInput) {
    Model m(tiny(), octahedron(), 1);
    EXPECT_THROW(m.stem(diff::Tensor::zeros({2, 2, 15, 16}), true), ShapeError);
    auto c = tiny();
    c.trunk_channels = {4, 8};
    EXPECT_THROW(Model(c, octahedron(), 1), Error);
}

TEST(Heads, ZeroLogitsDecodeToAxisCenters) {
    auto z = diff::Tensor::zeros({1, 3, 32});
    auto zd = diff::Tensor::zeros({1, 3, 16});
    auto c = heatmap::decode(heatmap::LixelHeatmapSet::from_logits(z, z, zd)).xyz;
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_DOUBLE_EQ(c[3 * i], 15.5);
        EXPECT_DOUBLE_EQ(c[3 * i + 1], 15.5);
        EXPECT_DOUBLE_EQ(c[3 * i + 2], 7.5);
    }
}

TEST(Fuse, ChannelArithmetic) {
    auto c = tiny();
    c.joints = 2;
    c.depth = 8;
    c.stem_channels = 16;
    Model m(c, octahedron(), 1);
    const auto* heat = m.params().find("meshnet.fuse.heat_weight");
    const auto* early = m.params().find("meshnet.fuse.weight");
    ASSERT_TRUE(heat && early);
    EXPECT_EQ(heat->value.size(1) + early->value.size(1), 32u);
    auto channels = render_pose_channels(diff::Tensor::from({1, 2, 3}, {1, 2, 3, 4, 5, 6}), c);
    EXPECT_EQ(channels.shape(), (diff::Shape{1, 16, 8, 8}));
}

TEST(Fuse, SpatialMismatchIsRejected) {
    Model m(tiny(), octahedron(), 1);
    EXPECT_THROW(m.fuse(diff::Tensor::zeros({2, 2, 3}), diff::Tensor::zeros({2, 4, 4, 4}), true), ShapeError);
}

TEST(GradientStop, MeshLossesLeavePoseNetUntouched) {
    auto topo = octahedron();
    Model m(tiny(), topo, 3);
    auto batch = random_batch(m.config(), topo, 2, 4);
    auto r = m.forward(batch, true);
    auto mesh_only = r.losses.pose_meshnet + r.losses.vertex + r.losses.normal * 0.1 + r.losses.edge;
    diff::backward(mesh_only);
    std::size_t pose_params = 0, mesh_nonzero = 0;
    for (const auto& p : m.params().params()) {
        if (p.group == kPoseGroup) {
            ++pose_params;
            EXPECT_TRUE(!p.value.has_grad() || all_zero(p.value.grad())) << p.name;
        } else if (p.group == kMeshGroup && p.value.has_grad() && !all_zero(p.value.grad())) {
            ++mesh_nonzero;
        }
    }
    EXPECT_GT(pose_params, 0u);
    EXPECT_GT(mesh_nonzero, 0u);

    m.params().zero_grad();
    diff::backward(m.forward(batch, true).losses.pose_posenet);
    std::size_t pose_nonzero = 0;
    for (const auto& p : m.params().params())
        if (p.group == kPoseGroup && p.value.has_grad() && !all_zero(p.value.grad())) ++pose_nonzero;
    EXPECT_GT(pose_nonzero, 0u);
}

TEST(GradientStop, PoseWeightsStillChangeTheFusedInput) {
    auto topo = octahedron();
    Model m(tiny(), topo, 3);
    auto batch = random_batch(m.config(), topo, 2, 4);
    auto before = m.forward(batch, false).mesh.coords.to_vector();
    for (auto& p : m.params().params())
        if (p.name == "posenet.head.out_x.weight") p.value.mutable_data()[0] += 3.0;
    auto after = m.forward(batch, false).mesh.coords.to_vector();
    EXPECT_NE(before, after);
}

TEST(GradientStop, GroundtruthModeRendersFromGroundtruth) {
    auto topo = octahedron();
    Model m(tiny(Cascade::gt_pose_to_mesh), topo, 3);
    auto batch = random_batch(m.config(), topo, 2, 4);
    auto before = m.forward(batch, false);
    for (auto& p : m.params().params())
        if (p.name == "posenet.head.out_x.weight") p.value.mutable_data()[0] += 3.0;
    auto after = m.forward(batch, false);
    EXPECT_EQ(before.mesh.coords.to_vector(), after.mesh.coords.to_vector());
    EXPECT_NE(before.pose.coords.to_vector(), after.pose.coords.to_vector());
    EXPECT_TRUE(after.losses.pose_posenet.defined());
}

TEST(Cascade, MeshOnlySkipsPoseNet) {
    Model m(tiny(Cascade::mesh_only), octahedron(), 3);
    EXPECT_EQ(m.params().count(kPoseGroup), 0u);
    auto r = m.forward(random_batch(m.config(), octahedron(), 2, 1), true);
    EXPECT_FALSE(r.pose.coords.defined());
    EXPECT_FALSE(r.losses.pose_posenet.defined());
    EXPECT_THROW(m.pose(diff::Tensor::zeros({2, 4, 8, 8}), Batch{}, true), Error);
}

TEST(Cascade, EveryVariantRunsForwardAndBackward) {
    auto topo = octahedron();
    for (auto cascade : {Cascade::mesh_only, Cascade::pose_then_mesh, Cascade::gt_pose_to_mesh})
        for (auto method : {heatmap::MarginalMethod::avg, heatmap::MarginalMethod::max,
                            heatmap::MarginalMethod::weighted_sum})
            for (auto stage : {MarginalStage::late, MarginalStage::early}) {
                auto c = tiny(cascade);
                c.marginalize_method = method;
                c.marginalize_stage = stage;
                Model m(c, topo, 5);
                auto r = m.forward(random_batch(c, topo, 2, 6), true);
                ASSERT_TRUE(std::isfinite(r.total.item()));
                diff::backward(r.total);
                std::size_t with_grad = 0;
                for (const auto& p : m.params().params())
                    if (p.value.has_grad() && !all_zero(p.value.grad())) ++with_grad;
                EXPECT_GT(with_grad, 0u) << to_string(cascade) << " " << heatmap::to_string(method) << " "
                                         << to_string(stage);
            }
}

TEST(Cascade, OutputsFiniteAcrossSeeds) {
    auto topo = octahedron();
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Model m(tiny(), topo, seed);
        auto r = m.forward(random_batch(m.config(), topo, 2, seed + 1000), seed % 2 == 0);
        for (double v : r.pose.coords.data()) ASSERT_TRUE(std::isfinite(v));
        for (double v : r.mesh.coords.data()) ASSERT_TRUE(std::isfinite(v));
        for (double v : r.mesh.heatmaps.hz.data()) ASSERT_TRUE(std::isfinite(v));
    }
}

TEST(Cascade, DisabledLossesGiveZeroGradients) {
    auto topo = octahedron();
    Model m(tiny(), topo, 5);
    mesh::LossWeights off;
    off.pose_posenet = off.pose_meshnet = off.vertex = off.normal = off.edge = false;
    auto r = m.forward(random_batch(m.config(), topo, 2, 6), true, off);
    EXPECT_EQ(r.total.item(), 0.0);
    diff::backward(r.total);
    for (const auto& p : m.params().params()) EXPECT_TRUE(!p.value.has_grad() || all_zero(p.value.grad())) << p.name;
}

TEST(Cascade, MissingMeshZeroesMeshTerms) {
    auto topo = octahedron();
    Model m(tiny(), topo, 5);
    auto batch = random_batch(m.config(), topo, 2, 6);
    batch.has_mesh = false;
    auto r = m.forward(batch, true);
    EXPECT_EQ(r.losses.vertex.item(), 0.0);
    EXPECT_EQ(r.losses.normal.item(), 0.0);
    EXPECT_EQ(r.losses.edge.item(), 0.0);
    EXPECT_GT(r.losses.pose_meshnet.item(), 0.0);
}

TEST(Cascade, SameSeedSameLossBits) {
    auto topo = octahedron();
    Model a(tiny(), topo, 9), b(tiny(), topo, 9);
    auto batch = random_batch(a.config(), topo, 2, 10);
    EXPECT_EQ(a.forward(batch, true).total.item(), b.forward(batch, true).total.item());
    EXPECT_EQ(a.forward(batch, false).mesh.coords.to_vector(), b.forward(batch, false).mesh.coords.to_vector());
}

TEST(GradCheck, FullForwardMatchesFiniteDifferences) {
    auto topo = octahedron();
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        for (auto cascade : {Cascade::mesh_only, Cascade::pose_then_mesh, Cascade::gt_pose_to_mesh}) {
            Model m(tiny(cascade), topo, seed);
            auto batch = random_batch(m.config(), topo, 2, seed + 50);
            Rng r(seed);
            // With the gradient stop, pose parameters legitimately disagree with
            // finite differences of the total loss; probe the mesh side there.
            auto probes = probes_for(m, cascade == Cascade::pose_then_mesh ? kMeshGroup : "", 1, r);
            const double err = diff::grad_check_probes([&] { return m.forward(batch, true).total; }, probes);
            EXPECT_LT(err, 1e-4) << to_string(cascade) << " seed " << seed;
        }
    }
}

TEST(GradCheck, DecodedPoseCoordsWrtHeadWeights) {
    auto topo = octahedron();
    for (auto method : {heatmap::MarginalMethod::avg, heatmap::MarginalMethod::weighted_sum}) {
        for (auto stage : {MarginalStage::late, MarginalStage::early}) {
            auto c = tiny();
            c.marginalize_method = method;
            c.marginalize_stage = stage;
            Model m(c, topo, 2);
            auto batch = random_batch(c, topo, 2, 3);
            Rng r(4);
            auto probes = probes_for(m, kPoseGroup, 1, r);
            auto weights = diff::Tensor::from({2, 2, 3}, {0.3, -1.0, 0.5, 0.2, 0.9, -0.4, 1.0, 0.1, -0.7, 0.6, 0.2, 0.8});
            auto loss = [&] {
                auto early = m.stem(batch.image, true);
                return diff::sum_all(m.pose(early, batch, true).coords * weights);
            };
            EXPECT_LT(diff::grad_check_probes(loss, probes), 1e-4);
        }
    }
}

TEST(Representations, AllVariantsRunAndHeadCountsOrder) {
    auto topo = octahedron();
    auto base = tiny(Cascade::mesh_only);
    ParametricDecoder dec{4, [](const diff::Tensor& p, const Batch&) {
                              auto w = diff::Tensor::full({4, 18}, 0.1);
                              return diff::reshape(diff::matmul(p, w), {p.size(0), 6, 3}) + 4.0;
                          }};
    std::map<Representation, std::size_t> counts;
    for (auto rep : {Representation::coord_regression, Representation::fc_lixel, Representation::conv_lixel,
                     Representation::parametric}) {
        auto c = base;
        c.representation = rep;
        Model m(c, topo, 1, dec);
        auto r = m.forward(random_batch(c, topo, 2, 2), true);
        diff::backward(r.total);
        EXPECT_TRUE(std::isfinite(r.total.item())) << to_string(rep);
        counts[rep] = m.mesh_head_parameters();
    }
    EXPECT_GT(counts[Representation::parametric], 0u);

    // At the default widths the convolutional head is the smaller one.
    NetConfig d;
    d.vertices = 182;
    d.cascade = Cascade::mesh_only;
    MeshTopology big;
    big.faces = {{0, 1, 2}};
    big.regressor = {8, 182, std::vector<double>(8 * 182, 1.0 / 182)};
    Model conv(d, big, 1);
    d.representation = Representation::coord_regression;
    Model coord(d, big, 1);
    EXPECT_LT(conv.mesh_head_parameters(), coord.mesh_head_parameters());
    d.representation = Representation::conv_lixel;
    Model again(d, big, 2);
    EXPECT_EQ(again.params().count(), conv.params().count());
}

TEST(Layouts, GridHeadsTrainAtResolutionEightAndLargeVoxelIsRefused) {
    auto topo = octahedron();
    for (auto kind : {heatmap::LayoutKind::pixel_xy_plus_lixel_z, heatmap::LayoutKind::voxel_xyz}) {
        auto c = tiny(Cascade::mesh_only);
        c.layout = kind;
        Model m(c, topo, 1);
        auto r = m.forward(random_batch(c, topo, 2, 2), true);
        EXPECT_TRUE(std::isfinite(r.total.item()));
        EXPECT_EQ(r.mesh.heatmaps.hx.shape(), (diff::Shape{2, 6, 8}));
        Rng rng(1);
        auto probes = probes_for(m, kMeshGroup, 1, rng);
        auto batch = random_batch(c, topo, 2, 2);
        EXPECT_LT(diff::grad_check_probes([&] { return m.forward(batch, true).total; }, probes), 1e-4);
    }
    NetConfig v;
    v.vertices = 182;
    v.layout = heatmap::LayoutKind::voxel_xyz;
    v.cascade = Cascade::mesh_only;
    v.deep_h = v.deep_w = 2;
    v.depth = 16;
    try {
        v.validate();
        FAIL() << "voxel 16 should exceed the cell budget";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("745472"), std::string::npos) << e.what();
    }
}

TEST(State, RoundTripRestoresOutputs) {
    auto topo = octahedron();
    Model a(tiny(), topo, 1), b(tiny(), topo, 2);
    auto batch = random_batch(a.config(), topo, 2, 3);
    a.forward(batch, true);  // moves the running statistics
    b.load_state(a.state());
    EXPECT_EQ(a.forward(batch, false).total.item(), b.forward(batch, false).total.item());
    auto s = a.state();
    s.pop_back();
    EXPECT_THROW(b.load_state(s), Error);
}
