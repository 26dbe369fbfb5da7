#include "lixelkit/network/model.hpp"

#include "lixelkit/diffcore/ops.hpp"
#include "lixelkit/meshgeom/mesh.hpp"

namespace lixelkit::net {

namespace {

bool runs_posenet(Cascade c) { return c != Cascade::mesh_only; }

}  // namespace

Model::Model(NetConfig cfg, MeshTopology topology, std::uint64_t seed, ParametricDecoder decoder)
    : cfg_(std::move(cfg)), topology_(std::move(topology)) {
    cfg_.validate();
    topology_.regressor.validate();
    if (topology_.regressor.joints != cfg_.joints || topology_.regressor.vertices != cfg_.vertices) {
        throw Error("model: regressor is " + std::to_string(topology_.regressor.joints) + "x" +
                    std::to_string(topology_.regressor.vertices) + " but config has J=" + std::to_string(cfg_.joints) +
                    ", V=" + std::to_string(cfg_.vertices));
    }
    diff::Rng rng(seed);
    LayerFactory f(params_, rng, cfg_.init);
    stem_ = ConvBlock(f, "stem.conv", kStemGroup, cfg_.in_channels, cfg_.stem_channels, 2);
    if (runs_posenet(cfg_.cascade)) {
        pose_trunk_ = Backbone(f, "posenet.trunk", kPoseGroup, cfg_.stem_channels, cfg_.trunk_channels);
        NetConfig pose_cfg = cfg_;
        pose_cfg.layout = heatmap::LayoutKind::lixel_xyz;
        pose_head_ = std::make_unique<LixelHead>(f, "posenet.head", kPoseGroup, pose_cfg, cfg_.joints);
        // 3x3 conv over [rendered joints ; early features], split into its two
        // channel blocks so the constant rendered block needs no input gradient.
        const std::size_t heat = cfg_.joints * cfg_.depth;
        fuse_heat_weight_ = f.weight("meshnet.fuse.heat_weight", kMeshGroup, {cfg_.fuse_channels, heat, 3, 3},
                                     (heat + cfg_.stem_channels) * 9);
    }
    const std::size_t fuse_in = cfg_.stem_channels + (fuse_heat_weight_.defined() ? cfg_.joints * cfg_.depth : 0);
    fuse_.weight = f.weight("meshnet.fuse.weight", kMeshGroup, {cfg_.fuse_channels, cfg_.stem_channels, 3, 3}, fuse_in * 9);
    fuse_.bn = BatchNorm(f, "meshnet.fuse.bn", kMeshGroup, cfg_.fuse_channels);
    mesh_trunk_ = Backbone(f, "meshnet.trunk", kMeshGroup, cfg_.fuse_channels, cfg_.trunk_channels);
    const std::string hp = "meshnet.head";
    switch (cfg_.representation) {
        case Representation::conv_lixel:
            if (cfg_.layout == heatmap::LayoutKind::lixel_xyz)
                mesh_head_ = std::make_unique<LixelHead>(f, hp, kMeshGroup, cfg_, cfg_.vertices);
            else
                mesh_head_ = std::make_unique<GridHead>(f, hp, kMeshGroup, cfg_, cfg_.vertices);
            break;
        case Representation::fc_lixel:
            mesh_head_ = std::make_unique<FcLixelHead>(f, hp, kMeshGroup, cfg_, cfg_.vertices);
            break;
        case Representation::coord_regression:
            mesh_head_ = std::make_unique<CoordHead>(f, hp, kMeshGroup, cfg_, cfg_.vertices);
            break;
        case Representation::parametric:
            mesh_head_ = std::make_unique<ParametricHead>(f, hp, kMeshGroup, cfg_, std::move(decoder));
            break;
    }
}

Tensor Model::stem(const Tensor& image, bool training) {
    if (image.dim() != 4 || image.size(1) != cfg_.in_channels || image.size(2) != cfg_.input_h() ||
        image.size(3) != cfg_.input_w()) {
        throw ShapeError("model: expected image [B, " + std::to_string(cfg_.in_channels) + ", " +
                         std::to_string(cfg_.input_h()) + ", " + std::to_string(cfg_.input_w()) + "], got " +
                         diff::to_string(image.shape()));
    }
    return stem_(image, training);
}

HeadOutput Model::pose(const Tensor& early, const Batch& batch, bool training) {
    if (!pose_head_) throw Error("model: PoseNet is not part of the " + to_string(cfg_.cascade) + " cascade");
    return pose_head_->forward(pose_trunk_(early, training), batch, training);
}

Tensor Model::fuse(const Tensor& pose_coords, const Tensor& early, bool training) {
    if (early.dim() != 4 || early.size(2) != cfg_.early_h() || early.size(3) != cfg_.early_w()) {
        throw ShapeError("fuse: early features " + diff::to_string(early.shape()) + " are not " +
                         std::to_string(cfg_.early_h()) + "x" + std::to_string(cfg_.early_w()));
    }
    auto pre = diff::conv2d(early, fuse_.weight, {}, diff::Conv2dOptions::uniform(1, 1));
    if (pose_coords.defined()) {
        if (!fuse_heat_weight_.defined()) throw Error("fuse: mesh_only model cannot take pose coordinates");
        pre = pre + diff::conv2d(render_pose_channels(pose_coords, cfg_), fuse_heat_weight_, {},
                                 diff::Conv2dOptions::uniform(1, 1));
    }
    return diff::relu(fuse_.bn(pre, training));
}

HeadOutput Model::mesh(const Tensor& fused, const Batch& batch, bool training) {
    return mesh_head_->forward(mesh_trunk_(fused, training), batch, training);
}

ForwardResult Model::forward(const Batch& batch, bool training, const mesh::LossWeights& weights) {
    ForwardResult r;
    auto early = stem(batch.image, training);
    Tensor render_from;
    if (runs_posenet(cfg_.cascade)) {
        r.pose = pose(early, batch, training);
        render_from = cfg_.cascade == Cascade::gt_pose_to_mesh ? batch.joints : r.pose.coords;
        if (!render_from.defined()) throw Error("model: gt_pose_to_mesh needs groundtruth joints");
    }
    r.mesh = mesh(fuse(render_from, early, training), batch, training);
    r.mesh_joints = mesh::regress_joints(topology_.regressor, r.mesh.coords);

    if (batch.joints.defined()) {
        if (r.pose.coords.defined()) r.losses.pose_posenet = mesh::l1_coord_loss(r.pose.coords, batch.joints, batch.joint_mask);
        r.losses.pose_meshnet = mesh::l1_coord_loss(r.mesh_joints, batch.joints, batch.joint_mask);
    }
    if (batch.has_mesh && batch.mesh.defined()) {
        r.losses.vertex = mesh::l1_coord_loss(r.mesh.coords, batch.mesh, batch.mesh_mask);
        r.losses.normal = mesh::normal_loss(r.mesh.coords, batch.mesh, topology_.faces);
        r.losses.edge = mesh::edge_loss(r.mesh.coords, batch.mesh, topology_.faces);
    } else {
        r.losses.vertex = r.losses.normal = r.losses.edge = Tensor::scalar(0.0);
    }
    r.total = mesh::total_loss(r.losses, weights);
    return r;
}

std::size_t Model::parameter_count(const std::string& prefix) const {
    std::size_t n = 0;
    for (const auto& p : params_.params())
        if (p.name.rfind(prefix, 0) == 0) n += p.value.numel();
    return n;
}

std::vector<diff::NamedArray> Model::state() const {
    std::vector<diff::NamedArray> out;
    for (const auto& p : params_.params()) out.push_back({p.name, p.value.shape(), p.value.to_vector()});
    for (const auto& b : params_.buffers()) out.push_back({b.name, b.value.shape(), b.value.to_vector()});
    return out;
}

void Model::load_state(const std::vector<diff::NamedArray>& arrays) {
    std::size_t used = 0;
    auto restore = [&](const std::string& name, Tensor& t) {
        for (const auto& a : arrays) {
            if (a.name != name) continue;
            if (a.shape != t.shape()) {
                throw Error("load_state: " + name + " has shape " + diff::to_string(a.shape) + ", model expects " +
                            diff::to_string(t.shape()));
            }
            std::copy(a.values.begin(), a.values.end(), t.mutable_data().begin());
            ++used;
            return;
        }
        throw Error("load_state: missing array " + name);
    };
    for (auto& p : params_.params()) restore(p.name, p.value);
    for (auto& b : params_.buffers()) restore(b.name, b.value);
    if (used != arrays.size()) throw Error("load_state: checkpoint has arrays the model does not know");
}

}  // namespace lixelkit::net
