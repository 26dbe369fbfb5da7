#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "lixelkit/diffcore/grad_check.hpp"
#include "lixelkit/diffcore/ops.hpp"
#include "lixelkit/diffcore/rng.hpp"
#include "lixelkit/heatmap/dump.hpp"
#include "lixelkit/heatmap/heatmap.hpp"

using namespace lixelkit;
using namespace lixelkit::heatmap;
using diff::Rng;
using diff::Tensor;

namespace {

HeatmapLayout cube(std::size_t n) { return {LayoutKind::voxel_xyz, n, n, n}; }

}  // namespace

TEST(Gaussian, PeakOnCellCenterIsOne) {
    auto g = render_gaussian_3d(Tensor::from({1, 3}, {3.0, 4.0, 5.0}), cube(8), 2.5);
    ASSERT_EQ(g.shape(), (diff::Shape{1, 8, 8, 8}));
    EXPECT_DOUBLE_EQ(g[(5 * 8 + 4) * 8 + 3], 1.0);
}

TEST(Gaussian, OneSigmaOffsetGivesExpMinusHalf) {
    auto g = render_gaussian_3d(Tensor::from({1, 3}, {1.0, 2.0, 2.0}), cube(8), 2.0);
    EXPECT_NEAR(g[(2 * 8 + 2) * 8 + 3], std::exp(-0.5), 1e-15);
    EXPECT_NEAR(g[(2 * 8 + 2) * 8 + 3], 0.60653065971263342, 1e-12);
}

TEST(Gaussian, DefaultSigmaDiagonalOffset) {
    auto g = render_gaussian_3d(Tensor::from({1, 3}, {0.5, 0.5, 3.0}), cube(8), kDefaultSigma);
    // cell (3, 3, 3) is offset (2.5, 2.5, 0) from the landmark
    EXPECT_NEAR(g[(3 * 8 + 3) * 8 + 3], std::exp(-1.0), 1e-15);
    EXPECT_NEAR(g[(3 * 8 + 3) * 8 + 3], 0.36787944117144233, 1e-12);
}

TEST(Gaussian, RejectsBadSigmaAndNonFiniteCoords) {
    EXPECT_THROW(render_gaussian_3d(Tensor::from({1, 3}, {1, 1, 1}), cube(4), 0.0), Error);
    EXPECT_THROW(render_gaussian_3d(Tensor::from({1, 3}, {1, std::nan(""), 1}), cube(4), 1.0), Error);
}

TEST(Gaussian, PeakDominatesAndValuesInUnitInterval) {
    Rng rng(9);
    for (int t = 0; t < 20; ++t) {
        const double p[3] = {rng.uniform(0, 7.99), rng.uniform(0, 5.99), rng.uniform(0, 9.99)};
        HeatmapLayout l{LayoutKind::voxel_xyz, 8, 6, 10};
        auto g = render_gaussian_3d(Tensor::from({1, 3}, {p[0], p[1], p[2]}), l, 1.5);
        const std::size_t rx = static_cast<std::size_t>(std::lround(p[0]));
        const std::size_t ry = static_cast<std::size_t>(std::lround(p[1]));
        const std::size_t rz = static_cast<std::size_t>(std::lround(p[2]));
        const double peak = g[(std::min<std::size_t>(rz, 9) * 6 + std::min<std::size_t>(ry, 5)) * 8 +
                              std::min<std::size_t>(rx, 7)];
        for (double v : g.data()) {
            EXPECT_GT(v, 0.0);
            EXPECT_LE(v, 1.0);
            EXPECT_LE(v, peak);
        }
    }
}

TEST(Gaussian, CoordinateGradientPassesGradCheck) {
    Rng rng(4);
    HeatmapLayout l{LayoutKind::voxel_xyz, 6, 5, 7};
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng r(seed);
        auto c = Tensor::from({2, 3}, {r.uniform(0, 6), r.uniform(0, 5), r.uniform(0, 7), r.uniform(-1, 7),
                                       r.uniform(0, 5), r.uniform(0, 7)});
        std::vector<double> w(2 * 7 * 5 * 6);
        for (auto& v : w) v = rng.uniform(-1, 1);
        auto weights = Tensor::from({2, 7, 5, 6}, w);
        auto f = [&](const Tensor& x) { return diff::sum_all(render_gaussian_3d(x, l, 1.7) * weights); };
        EXPECT_LT(diff::grad_check(f, c), 1e-4);
    }
}

TEST(SoftArgmax, UniformLogitsGiveCenter) {
    EXPECT_DOUBLE_EQ(soft_argmax_1d(Tensor::zeros({1, 4})).item(), 1.5);
}

TEST(SoftArgmax, DominantLogitGivesItsIndex) {
    auto y = soft_argmax_1d(Tensor::from({1, 5}, {0, 0, 0, 60, 0}));
    EXPECT_NEAR(y.item(), 3.0, 1e-6);
}

TEST(SoftArgmax, LogThreeWeightedExpectation) {
    auto y = soft_argmax_1d(Tensor::from({1, 4}, {0.0, std::log(3.0), 0.0, 0.0}));
    EXPECT_NEAR(y.item(), 8.0 / 6.0, 1e-12);
}

TEST(SoftArgmax, RejectsSingleCellAndNonFinite) {
    EXPECT_THROW(soft_argmax_1d(Tensor::zeros({2, 1})), ShapeError);
    EXPECT_THROW(soft_argmax_1d(Tensor::from({1, 2}, {0.0, INFINITY})), Error);
}

TEST(SoftArgmax, ShiftInvariantAndReversalEquivariant) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng r(seed);
        const std::size_t L = 2 + r.index(30);
        std::vector<double> v(L), rev(L);
        for (auto& x : v) x = r.uniform(-4, 4);
        std::reverse_copy(v.begin(), v.end(), rev.begin());
        const double a = soft_argmax_1d(Tensor::from({L}, v)).item();
        std::vector<double> shifted = v;
        for (auto& x : shifted) x += 17.25;
        EXPECT_NEAR(soft_argmax_1d(Tensor::from({L}, shifted)).item(), a, 1e-9);
        EXPECT_NEAR(soft_argmax_1d(Tensor::from({L}, rev)).item(), static_cast<double>(L - 1) - a, 1e-9);
        EXPECT_GE(a, 0.0);
        EXPECT_LE(a, static_cast<double>(L - 1));
    }
}

TEST(Decode, SymmetricBimodalGivesMidpoint) {
    std::vector<double> h(20, 0.0);
    h[4] = h[13] = 0.5;
    auto t = Tensor::from({1, 20}, h);
    auto c = decode({t, t, t});
    EXPECT_NEAR(c.xyz[0], 8.5, 1e-12);
}

TEST(Decode, DeltaAtZeroGivesZero) {
    std::vector<double> h(8, 0.0);
    h[0] = 1.0;
    auto t = Tensor::from({1, 8}, h);
    auto c = decode({t, t, t});
    for (double v : c.xyz.data()) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Decode, FromLogitsRowsAreNormalized) {
    Rng r(2);
    std::vector<double> v(3 * 9);
    for (auto& x : v) x = r.uniform(-3, 3);
    auto set = LixelHeatmapSet::from_logits(Tensor::from({3, 9}, v), Tensor::from({3, 9}, v),
                                            Tensor::from({3, 9}, v));
    for (std::size_t row = 0; row < 3; ++row) {
        double s = 0.0;
        for (std::size_t i = 0; i < 9; ++i) {
            EXPECT_GE(set.hx[row * 9 + i], 0.0);
            s += set.hx[row * 9 + i];
        }
        EXPECT_NEAR(s, 1.0, 1e-9);
    }
}

TEST(Decode, RenderDecodeRoundTripWithinFiveHundredthsOfACell) {
    const std::size_t L = 64;
    const double margin = 3.0 * kDefaultSigma;
    Rng r(123);
    std::vector<double> centers(100 * 3);
    for (auto& c : centers) c = r.uniform(margin, static_cast<double>(L - 1) - margin);
    auto ct = Tensor::from({100, 3}, centers);
    auto px = normalize_rows(render_gaussian_1d(diff::narrow(ct, 1, 0, 1), L));
    auto py = normalize_rows(render_gaussian_1d(diff::narrow(ct, 1, 1, 1), L));
    auto pz = normalize_rows(render_gaussian_1d(diff::narrow(ct, 1, 2, 1), L));
    auto back = decode({diff::reshape(px, {100, L}), diff::reshape(py, {100, L}), diff::reshape(pz, {100, L})});
    for (std::size_t i = 0; i < centers.size(); ++i) EXPECT_LT(std::abs(back.xyz[i] - centers[i]), 0.05);
}

TEST(Marginalize, ConstantMapGivesConstantProfile) {
    auto f = Tensor::full({2, 3, 4}, 1.75);
    for (auto m : {MarginalMethod::avg, MarginalMethod::max}) {
        for (auto axis : {MarginalAxis::x, MarginalAxis::y, MarginalAxis::xy}) {
            const auto p = marginalize(f, axis, m);
            for (double v : p.data()) EXPECT_DOUBLE_EQ(v, 1.75);
        }
    }
}

TEST(Marginalize, SingleRowAveragedOverY) {
    const std::size_t H = 6, W = 5;
    std::vector<double> v(H * W, 0.0);
    for (std::size_t x = 0; x < W; ++x) v[2 * W + x] = 1.0;
    auto p = marginalize(Tensor::from({1, H, W}, v), MarginalAxis::y, MarginalMethod::avg);
    ASSERT_EQ(p.shape(), (diff::Shape{1, W}));
    for (double e : p.data()) EXPECT_DOUBLE_EQ(e, 1.0 / H);
}

TEST(Marginalize, MatchesBruteForceLoops) {
    Rng r(8);
    std::vector<double> v(4 * 5);
    for (auto& e : v) e = r.uniform(-2, 2);
    auto f = Tensor::from({1, 4, 5}, v);
    auto px = marginalize(f, MarginalAxis::x, MarginalMethod::avg);
    auto py = marginalize(f, MarginalAxis::y, MarginalMethod::max);
    std::vector<double> wy = {0.1, -0.4, 2.0, 0.7};
    auto pw = marginalize(f, MarginalAxis::y, MarginalMethod::weighted_sum, Tensor::from({4}, wy));
    for (std::size_t y = 0; y < 4; ++y) {
        double s = 0.0;
        for (std::size_t x = 0; x < 5; ++x) s += v[y * 5 + x];
        EXPECT_NEAR(px[y], s / 5.0, 1e-12);
    }
    for (std::size_t x = 0; x < 5; ++x) {
        double m = -1e9, ws = 0.0;
        for (std::size_t y = 0; y < 4; ++y) {
            m = std::max(m, v[y * 5 + x]);
            ws += wy[y] * v[y * 5 + x];
        }
        EXPECT_DOUBLE_EQ(py[x], m);
        EXPECT_NEAR(pw[x], ws, 1e-12);
    }
}

TEST(Marginalize, NestedAverageEqualsGlobalMean) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng r(seed);
        const std::size_t H = 2 + r.index(6), W = 2 + r.index(6);
        std::vector<double> v(H * W);
        double total = 0.0;
        for (auto& e : v) total += (e = r.uniform(-3, 3));
        auto f = Tensor::from({H, W}, v);
        auto nested = diff::mean_all(marginalize(f, MarginalAxis::x, MarginalMethod::avg)).item();
        EXPECT_NEAR(nested, total / static_cast<double>(H * W), 1e-12);
        EXPECT_NEAR(marginalize(f, MarginalAxis::xy, MarginalMethod::avg).item(), total / static_cast<double>(H * W),
                    1e-12);
    }
}

TEST(Marginalize, WeightedSumNeedsMatchingWeights) {
    auto f = Tensor::zeros({2, 3, 4});
    EXPECT_THROW(marginalize(f, MarginalAxis::x, MarginalMethod::weighted_sum), ShapeError);
    EXPECT_THROW(marginalize(f, MarginalAxis::x, MarginalMethod::weighted_sum, Tensor::zeros({3})), ShapeError);
    EXPECT_THROW(parse_marginal_method("median"), Error);
}

TEST(Marginalize, AllMethodsAreDifferentiable) {
    Rng r(12);
    std::vector<double> v(2 * 3 * 4);
    for (auto& e : v) e = r.uniform(-1, 1);
    auto w = Tensor::from({3}, {0.2, -0.5, 1.1});
    for (auto m : {MarginalMethod::avg, MarginalMethod::max, MarginalMethod::weighted_sum}) {
        auto f = [&](const Tensor& x) {
            return diff::sum_all(diff::exp(marginalize(x, MarginalAxis::y, m, w)));
        };
        EXPECT_LT(diff::grad_check(f, Tensor::from({2, 3, 4}, v)), 1e-4) << to_string(m);
    }
}

TEST(MemoryModel, SmallCases) {
    EXPECT_EQ(memory_cells(1, 2, LayoutKind::voxel_xyz), 8u);
    EXPECT_EQ(memory_cells(776, 64, LayoutKind::pixel_xy_plus_lixel_z), 3228160u);
}

TEST(MemoryModel, FullResolutionBodyMesh) {
    EXPECT_EQ(memory_cells(6980, 64, LayoutKind::lixel_xyz), 1340160u);
    EXPECT_EQ(memory_cells(6980, 64, LayoutKind::pixel_xy_plus_lixel_z), 29036800u);
    EXPECT_EQ(memory_cells(6980, 64, LayoutKind::voxel_xyz), 1829765120u);
    const double ratio = static_cast<double>(memory_cells(6980, 64, LayoutKind::voxel_xyz)) /
                         static_cast<double>(memory_cells(6980, 64, LayoutKind::lixel_xyz));
    EXPECT_NEAR(ratio, 64.0 * 64.0 / 3.0, 1e-9);
    EXPECT_NEAR(ratio, 1365.3, 0.05);
}

TEST(MemoryModel, MonotoneWithExactRatios) {
    Rng r(77);
    for (int t = 0; t < 50; ++t) {
        const std::uint64_t V = 1 + r.index(10000), D = 1 + r.index(128);
        const auto l = memory_cells(V, D, LayoutKind::lixel_xyz);
        const auto p = memory_cells(V, D, LayoutKind::pixel_xy_plus_lixel_z);
        const auto v = memory_cells(V, D, LayoutKind::voxel_xyz);
        EXPECT_EQ(l * (D * D + D), p * 3 * D);
        EXPECT_EQ(l * D * D * D, v * 3 * D);
        for (auto k : {LayoutKind::lixel_xyz, LayoutKind::pixel_xy_plus_lixel_z, LayoutKind::voxel_xyz}) {
            EXPECT_LT(memory_cells(V, D, k), memory_cells(V + 1, D, k));
            EXPECT_LT(memory_cells(V, D, k), memory_cells(V, D + 1, k));
        }
    }
    EXPECT_THROW(memory_cells(1ull << 40, 1ull << 20, LayoutKind::voxel_xyz), Error);
}

TEST(Targets, MasksAndEmptySets) {
    HeatmapLayout l{LayoutKind::lixel_xyz, 8, 8, 8};
    auto full = encode_target({{1, 2, 3}}, true, l);
    EXPECT_EQ(full.mask[0], (std::array<double, 3>{1, 1, 1}));
    auto flat = encode_target({{1, 2, 99}}, false, l);
    EXPECT_EQ(flat.mask[0], (std::array<double, 3>{1, 1, 0}));
    EXPECT_TRUE(flat.out_of_range[0]);
    EXPECT_DOUBLE_EQ(flat.coords[0][2], 99.0);
    auto empty = encode_target({}, true, l);
    EXPECT_TRUE(empty.coords.empty());
    EXPECT_TRUE(empty.mask.empty());
}

TEST(Layout, ValidationAndStorage) {
    EXPECT_THROW((HeatmapLayout{LayoutKind::lixel_xyz, 1, 8, 8}.validate()), Error);
    EXPECT_EQ((HeatmapLayout{LayoutKind::lixel_xyz, 8, 8, 8}.cells_per_landmark()), 24u);
    EXPECT_EQ((HeatmapLayout{LayoutKind::pixel_xy_plus_lixel_z, 8, 8, 8}.cells_per_landmark()), 72u);
    EXPECT_EQ((HeatmapLayout{LayoutKind::voxel_xyz, 8, 8, 8}.cells_per_landmark()), 512u);
    EXPECT_EQ(parse_layout_kind("voxel"), LayoutKind::voxel_xyz);
    EXPECT_THROW(parse_layout_kind("mesh"), Error);
}

TEST(Dump, HeaderAndPayloadSurviveAndPngIsWellFormed) {
    const auto dir = std::filesystem::temp_directory_path();
    HeatmapDump d{"hx", "lixel_xyz", 2.5, {2, 3}, {0.0, 0.25, 0.5, 1.0, -2.0, 1e-9}};
    write_heatmap_dumps(dir / "lixelkit_dump.bin", {d, d});
    auto back = read_heatmap_dumps(dir / "lixelkit_dump.bin");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].values, d.values);
    EXPECT_EQ(back[0].shape, d.shape);
    EXPECT_EQ(back[0].sigma, 2.5);

    write_png_gray(dir / "lixelkit_slice.png", 3, 2, d.values);
    std::ifstream is(dir / "lixelkit_slice.png", std::ios::binary);
    char sig[8];
    is.read(sig, 8);
    EXPECT_EQ(std::string(sig + 1, 3), "PNG");
}
