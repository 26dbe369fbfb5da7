#include <gtest/gtest.h>

#include <cmath>

#include "lixelkit/camera/camera.hpp"
#include "lixelkit/diffcore/grad_check.hpp"
#include "lixelkit/diffcore/ops.hpp"
#include "lixelkit/diffcore/rng.hpp"

using namespace lixelkit;
using namespace lixelkit::camera;
using diff::Rng;
using diff::Tensor;

namespace {

heatmap::HeatmapLayout cells64() { return {heatmap::LayoutKind::lixel_xyz, 64, 64, 64}; }

Affine2x3 random_affine(Rng& r) {
    // Rotation + anisotropic scale + shift, as a crop-and-resize would produce.
    const double th = r.uniform(-0.5, 0.5), s = r.uniform(0.3, 3.0), k = r.uniform(0.8, 1.2);
    return {s * std::cos(th), -s * std::sin(th), r.uniform(-300, 300), k * s * std::sin(th), k * s * std::cos(th),
            r.uniform(-300, 300)};
}

CameraFrame random_frame(Rng& r) {
    CameraFrame f;
    f.fx = r.uniform(500, 2000);
    f.fy = f.fx * r.uniform(0.9, 1.1);
    f.cx = r.uniform(300, 700);
    f.cy = r.uniform(200, 500);
    f.affine = random_affine(r);
    f.depth_span = 2000.0;
    f.root_depth = r.uniform(3000, 7000);
    return f;
}

}  // namespace

TEST(CellsToCrop, CenterMapsToInputCenterAndZeroDepth) {
    auto p = cells_to_crop_pixels(Tensor::from({1, 3}, {32, 32, 32}), cells64(), 256, 256, 2000);
    EXPECT_EQ(p.to_vector(), (std::vector<double>{128, 128, 0}));
    auto z0 = cells_to_crop_pixels(Tensor::from({1, 3}, {0, 0, 0}), cells64(), 256, 256, 2000);
    EXPECT_DOUBLE_EQ(z0[2], -1000.0);
}

TEST(CellsToCrop, MatchesClosedForm) {
    Rng r(1);
    heatmap::HeatmapLayout l{heatmap::LayoutKind::lixel_xyz, 40, 24, 50};
    std::vector<double> v(30);
    for (auto& x : v) x = r.uniform(-5, 60);
    auto p = cells_to_crop_pixels(Tensor::from({10, 3}, v), l, 320, 192, 1500);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_NEAR(p[3 * i], v[3 * i] * 320.0 / 40.0, 1e-12);
        EXPECT_NEAR(p[3 * i + 1], v[3 * i + 1] * 192.0 / 24.0, 1e-12);
        EXPECT_NEAR(p[3 * i + 2], (v[3 * i + 2] / 50.0 - 0.5) * 1500.0, 1e-9);
    }
}

TEST(Affine, IdentityAndScale) {
    auto p = Tensor::from({2, 2}, {3, 4, -1, 7});
    EXPECT_EQ(apply_inverse_affine(p, kIdentityAffine).to_vector(), p.to_vector());
    auto q = apply_inverse_affine(p, {2, 0, 0, 0, 2, 0});
    EXPECT_EQ(q.to_vector(), (std::vector<double>{1.5, 2, -0.5, 3.5}));
    EXPECT_THROW(invert_affine({1, 2, 0, 2, 4, 0}), Error);
}

TEST(Affine, RandomRoundTrip) {
    Rng r(2);
    for (int t = 0; t < 50; ++t) {
        const auto a = random_affine(r);
        std::vector<double> v(20);
        for (auto& x : v) x = r.uniform(-1000, 1000);
        auto p = Tensor::from({10, 2}, v);
        auto back = apply_affine(apply_inverse_affine(p, a), a);
        for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(back[i], v[i], 1e-9);
    }
}

TEST(BackProject, PrincipalPointAndUnitTangent) {
    CameraFrame f = CameraFrame::normalized(256, 256, 2000, 0);
    auto c = back_project(Tensor::from({1, 2}, {f.cx, f.cy}), Tensor::from({1}, {1000}), f);
    EXPECT_EQ(c.to_vector(), (std::vector<double>{0, 0, 1000}));
    auto t = back_project(Tensor::from({1, 2}, {f.cx + f.fx, f.cy}), Tensor::from({1}, {500}), f);
    EXPECT_DOUBLE_EQ(t[0], 500.0);
}

TEST(BackProject, InvertsProjection) {
    Rng r(3);
    for (int t = 0; t < 20; ++t) {
        auto f = random_frame(r);
        std::vector<double> pts;
        for (int i = 0; i < 50; ++i) {
            const double z = r.uniform(-3000, 9000);
            pts.insert(pts.end(), {r.uniform(-800, 800), r.uniform(-800, 800), std::abs(z) < 10 ? 10 : z});
        }
        auto world = Tensor::from({50, 3}, pts);
        auto px = project(world, f);
        auto back = back_project(px, diff::reshape(diff::narrow(world, 1, 2, 1), {50}), f);
        for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_NEAR(back[i], pts[i], 1e-9);
    }
}

TEST(Frame, NormalizedIntrinsicsAndJson) {
    auto f = CameraFrame::normalized(256, 256, 2000, 5000);
    EXPECT_DOUBLE_EQ(f.fx, 1280.0);
    EXPECT_DOUBLE_EQ(f.cx, 128.0);
    f.affine = {1, 0.5, 3, 0, 2, -4};
    auto j = to_json(f);
    for (const char* key : {"fx", "fy", "cx", "cy", "affine", "depth_span", "root_depth"}) EXPECT_TRUE(j.contains(key));
    auto back = camera_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(back.affine, f.affine);
    EXPECT_EQ(back.root_depth, 5000.0);
    j["fx"] = -1.0;
    EXPECT_THROW(camera_from_json(j), Error);
    j.erase("fx");
    EXPECT_THROW(camera_from_json(j), Error);
}

TEST(RecoverMesh, HeatmapCenterRecoversRootDepth) {
    auto f = CameraFrame::normalized(256, 256, 2000, 4500);
    auto m = recover_mesh(Tensor::from({1, 3}, {32, 32, 32}), f, cells64());
    EXPECT_NEAR(m[0], 0.0, 1e-12);
    EXPECT_NEAR(m[1], 0.0, 1e-12);
    EXPECT_DOUBLE_EQ(m[2], 4500.0);
}

TEST(RecoverMesh, IdentityCropEqualsBackProjectionOfScaledCells) {
    auto f = CameraFrame::normalized(256, 256, 2000, 5000);
    auto cells = Tensor::from({2, 3}, {10, 20, 30, 50.5, 3.25, 7});
    auto m = recover_mesh(cells, f, cells64());
    auto crop = cells_to_crop_pixels(cells, cells64(), 256, 256, 2000);
    auto direct = back_project(diff::narrow(crop, 1, 0, 2), diff::reshape(diff::narrow(crop, 1, 2, 1), {2}) + 5000.0, f);
    EXPECT_EQ(m.to_vector(), direct.to_vector());
}

TEST(RecoverMesh, FullRoundTripWithinMicrometer) {
    Rng r(4);
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
        auto f = random_frame(r);
        std::vector<double> pts;
        for (int i = 0; i < 50; ++i) {
            pts.insert(pts.end(), {r.uniform(-700, 700), r.uniform(-700, 700), f.root_depth + r.uniform(-999, 999)});
        }
        auto world = Tensor::from({50, 3}, pts);
        auto cells = encode_to_cells(world, f, cells64());
        auto back = recover_mesh(cells, f, cells64());
        for (std::size_t i = 0; i < pts.size(); ++i) worst = std::max(worst, std::abs(back[i] - pts[i]));
    }
    EXPECT_LT(worst, 1e-6);
}

TEST(RecoverMesh, Differentiable) {
    Rng r(5);
    for (int t = 0; t < 5; ++t) {
        auto f = random_frame(r);
        std::vector<double> v(12);
        for (auto& x : v) x = r.uniform(0, 63);
        std::vector<double> w(12);
        for (auto& x : w) x = r.uniform(-1, 1);
        auto weights = Tensor::from({4, 3}, w);
        auto fn = [&](const Tensor& c) { return diff::sum_all(recover_mesh(c, f, cells64()) * weights); };
        EXPECT_LT(diff::grad_check(fn, Tensor::from({4, 3}, v)), 1e-4);
    }
}
