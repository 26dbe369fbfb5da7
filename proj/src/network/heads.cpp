#include "lixelkit/network/heads.hpp"

#include "lixelkit/diffcore/ops.hpp"

namespace lixelkit::net {

namespace {

Tensor flatten(const Tensor& x) { return diff::reshape(x, {x.size(0), x.numel() / x.size(0)}); }

Tensor global_avg_pool(const Tensor& x) { return diff::mean(diff::mean(x, -1), -1); }

}  // namespace

Backbone::Backbone(LayerFactory& f, const std::string& prefix, const std::string& group, std::size_t in,
                   const std::vector<std::size_t>& channels) {
    for (std::size_t i = 0; i < channels.size(); ++i) {
        blocks.emplace_back(f, prefix + ".block" + std::to_string(i), group, i == 0 ? in : channels[i - 1],
                            channels[i], 2);
    }
}

Tensor Backbone::operator()(const Tensor& x, bool training) {
    Tensor y = x;
    for (auto& b : blocks) y = b(y, training);
    return y;
}

LixelHead::LixelHead(LayerFactory& f, const std::string& prefix, const std::string& group, const NetConfig& cfg,
                     std::size_t landmarks)
    : method_(cfg.marginalize_method),
      stage_(cfg.marginalize_stage),
      landmarks_(landmarks),
      head_channels_(cfg.head_channels),
      depth_(cfg.depth) {
    const bool early = stage_ == MarginalStage::early;
    for (int i = 0; i < 3; ++i) {
        up_.emplace_back(f, prefix + ".up" + std::to_string(i), group, i == 0 ? cfg.deep_channels() : cfg.head_channels,
                         cfg.head_channels, early);
    }
    if (method_ == heatmap::MarginalMethod::weighted_sum) {
        const std::size_t h = early ? cfg.deep_h : cfg.early_h();
        const std::size_t w = early ? cfg.deep_w : cfg.early_w();
        weights_y_ = f.constant(prefix + ".marginal_y", group, {h}, 1.0 / static_cast<double>(h));
        weights_x_ = f.constant(prefix + ".marginal_x", group, {w}, 1.0 / static_cast<double>(w));
    }
    out_x_ = Pointwise1d(f, prefix + ".out_x", group, cfg.head_channels, landmarks);
    out_y_ = Pointwise1d(f, prefix + ".out_y", group, cfg.head_channels, landmarks);
    z_fc_ = Linear(f, prefix + ".z_fc", group, cfg.deep_channels(), cfg.head_channels * cfg.depth);
    z_bn_ = BatchNorm(f, prefix + ".z_bn", group, cfg.head_channels * cfg.depth);
    out_z_ = Pointwise1d(f, prefix + ".out_z", group, cfg.head_channels, landmarks);
}

Tensor LixelHead::z_logits(const Tensor& deep, bool training) {
    auto z = diff::relu(z_bn_(z_fc_(global_avg_pool(deep)), training));
    return out_z_(diff::reshape(z, {deep.size(0), head_channels_, depth_}));
}

std::array<Tensor, 3> LixelHead::logits(const Tensor& deep, bool training) {
    using heatmap::MarginalAxis;
    Tensor along_x, along_y;  // [B, C, W] and [B, C, H]
    if (stage_ == MarginalStage::late) {
        Tensor up = deep;
        for (auto& u : up_) up = u(up, training);
        along_x = heatmap::marginalize(up, MarginalAxis::y, method_, weights_y_);
        along_y = heatmap::marginalize(up, MarginalAxis::x, method_, weights_x_);
    } else {
        along_x = heatmap::marginalize(deep, MarginalAxis::y, method_, weights_y_);
        along_y = heatmap::marginalize(deep, MarginalAxis::x, method_, weights_x_);
        for (auto& u : up_) {
            along_x = u(along_x, training);
            along_y = u(along_y, training);
        }
    }
    return {out_x_(along_x), out_y_(along_y), z_logits(deep, training)};
}

HeadOutput LixelHead::forward(const Tensor& deep, const Batch&, bool training) {
    auto [lx, ly, lz] = logits(deep, training);
    HeadOutput out;
    out.heatmaps = heatmap::LixelHeatmapSet::from_logits(lx, ly, lz);
    out.coords = heatmap::decode(out.heatmaps).xyz;
    return out;
}

GridHead::GridHead(LayerFactory& f, const std::string& prefix, const std::string& group, const NetConfig& cfg,
                   std::size_t landmarks)
    : kind_(cfg.layout), landmarks_(landmarks), head_channels_(cfg.head_channels), depth_(cfg.depth) {
    for (int i = 0; i < 3; ++i) {
        up_.emplace_back(f, prefix + ".up" + std::to_string(i), group, i == 0 ? cfg.deep_channels() : cfg.head_channels,
                         cfg.head_channels, false);
    }
    const bool voxel = kind_ == heatmap::LayoutKind::voxel_xyz;
    out_ = Pointwise2d(f, prefix + ".out_grid", group, cfg.head_channels, voxel ? landmarks * cfg.depth : landmarks);
    if (!voxel) {
        z_fc_ = Linear(f, prefix + ".z_fc", group, cfg.deep_channels(), cfg.head_channels * cfg.depth);
        z_bn_ = BatchNorm(f, prefix + ".z_bn", group, cfg.head_channels * cfg.depth);
        out_z_ = Pointwise1d(f, prefix + ".out_z", group, cfg.head_channels, landmarks);
    }
}

HeadOutput GridHead::forward(const Tensor& deep, const Batch&, bool training) {
    Tensor up = deep;
    for (auto& u : up_) up = u(up, training);
    const std::size_t b = deep.size(0), h = up.size(2), w = up.size(3);
    auto grid = out_(up);
    HeadOutput out;
    if (kind_ == heatmap::LayoutKind::voxel_xyz) {
        auto p = diff::softmax(diff::reshape(grid, {b, landmarks_, depth_ * h * w}), -1);
        p = diff::reshape(p, {b, landmarks_, depth_, h, w});
        auto over_d = diff::sum(p, 2);  // [B, N, H, W]
        out.heatmaps.hx = diff::sum(over_d, 2);
        out.heatmaps.hy = diff::sum(over_d, 3);
        out.heatmaps.hz = diff::sum(diff::sum(p, -1), -1);
    } else {
        auto p = diff::softmax(diff::reshape(grid, {b, landmarks_, h * w}), -1);
        p = diff::reshape(p, {b, landmarks_, h, w});
        out.heatmaps.hx = diff::sum(p, 2);
        out.heatmaps.hy = diff::sum(p, 3);
        auto z = diff::relu(z_bn_(z_fc_(global_avg_pool(deep)), training));
        out.heatmaps.hz = diff::softmax(out_z_(diff::reshape(z, {b, head_channels_, depth_})), -1);
    }
    out.coords = heatmap::decode(out.heatmaps).xyz;
    return out;
}

FcLixelHead::FcLixelHead(LayerFactory& f, const std::string& prefix, const std::string& group, const NetConfig& cfg,
                         std::size_t landmarks)
    : landmarks_(landmarks),
      width_(cfg.early_w()),
      height_(cfg.early_h()),
      depth_(cfg.depth),
      hidden_(f, prefix + ".hidden", group, cfg.deep_channels() * cfg.deep_h * cfg.deep_w, cfg.fc_hidden),
      out_(f, prefix + ".out", group, cfg.fc_hidden, landmarks * (cfg.early_w() + cfg.early_h() + cfg.depth)) {}

HeadOutput FcLixelHead::forward(const Tensor& deep, const Batch&, bool) {
    const std::size_t b = deep.size(0);
    auto l = diff::reshape(out_(diff::relu(hidden_(flatten(deep)))), {b, landmarks_, width_ + height_ + depth_});
    HeadOutput out;
    out.heatmaps = heatmap::LixelHeatmapSet::from_logits(diff::narrow(l, -1, 0, width_),
                                                         diff::narrow(l, -1, width_, height_),
                                                         diff::narrow(l, -1, width_ + height_, depth_));
    out.coords = heatmap::decode(out.heatmaps).xyz;
    return out;
}

CoordHead::CoordHead(LayerFactory& f, const std::string& prefix, const std::string& group, const NetConfig& cfg,
                     std::size_t landmarks)
    : landmarks_(landmarks),
      center_(Tensor::from({1, 1, 3}, {0.5 * static_cast<double>(cfg.early_w()),
                                       0.5 * static_cast<double>(cfg.early_h()), 0.5 * static_cast<double>(cfg.depth)})),
      hidden_(f, prefix + ".hidden", group, cfg.deep_channels() * cfg.deep_h * cfg.deep_w, cfg.fc_hidden),
      out_(f, prefix + ".out", group, cfg.fc_hidden, landmarks * 3) {}

HeadOutput CoordHead::forward(const Tensor& deep, const Batch&, bool) {
    const std::size_t b = deep.size(0);
    HeadOutput out;
    out.coords = diff::reshape(out_(diff::relu(hidden_(flatten(deep)))), {b, landmarks_, 3}) + center_;
    return out;
}

ParametricHead::ParametricHead(LayerFactory& f, const std::string& prefix, const std::string& group,
                               const NetConfig& cfg, ParametricDecoder decoder)
    : decoder_(std::move(decoder)),
      hidden_(f, prefix + ".hidden", group, cfg.deep_channels() * cfg.deep_h * cfg.deep_w, cfg.fc_hidden),
      out_(f, prefix + ".out", group, cfg.fc_hidden, decoder_.param_count) {
    if (!decoder_.decode || decoder_.param_count == 0) throw Error("parametric head: no decoder supplied");
}

HeadOutput ParametricHead::forward(const Tensor& deep, const Batch& batch, bool) {
    HeadOutput out;
    out.coords = decoder_.decode(out_(diff::relu(hidden_(flatten(deep)))), batch);
    return out;
}

Tensor render_pose_channels(const Tensor& coords, const NetConfig& cfg) {
    auto g = heatmap::render_gaussian_3d(coords.detach(), cfg.pose_layout(), cfg.sigma);
    return diff::reshape(g, {coords.size(0), cfg.joints * cfg.depth, cfg.early_h(), cfg.early_w()});
}

}  // namespace lixelkit::net
