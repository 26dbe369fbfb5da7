#include "lixelkit/experiments/dataset.hpp"

#include <cmath>

#include "lixelkit/diffcore/checkpoint.hpp"
#include "lixelkit/diffcore/rng.hpp"

namespace lixelkit::exp {

namespace {

std::vector<double> sample_pose(diff::Rng& r, std::size_t joints) {
    std::vector<double> w(joints * 3, 0.0);
    // root: yaw with a little tilt
    w[0] = r.uniform(-0.25, 0.25);
    w[1] = r.uniform(-1.0, 1.0);
    w[2] = r.uniform(-0.25, 0.25);
    // chest
    for (int k = 0; k < 3; ++k) w[3 + k] = r.uniform(-0.4, 0.4);
    // left knee: swing about an axis perpendicular to the shin
    w[5 * 3 + 0] = r.uniform(-0.9, 0.9);
    w[5 * 3 + 2] = r.uniform(-0.9, 0.9);
    return w;
}

camera::CameraFrame crop_camera(const DatasetOptions& o, const mesh::Vec3& root) {
    camera::CameraFrame f;
    f.fx = f.fy = o.focal;
    f.cx = f.cy = o.image_size / 2.0;
    f.input_width = o.input_width;
    f.input_height = o.input_height;
    f.depth_span = o.depth_span;
    f.root_depth = root[2];
    const double u = root[0] / root[2] * f.fx + f.cx;
    const double v = root[1] / root[2] * f.fy + f.cy;
    // The crop spans depth_span millimeters at the root depth.
    const double sx = static_cast<double>(o.input_width) * root[2] / (o.depth_span * f.fx);
    const double sy = static_cast<double>(o.input_height) * root[2] / (o.depth_span * f.fy);
    f.affine = {sx, 0.0, o.input_width / 2.0 - sx * u, 0.0, sy, o.input_height / 2.0 - sy * v};
    f.validate();
    return f;
}

void render_blobs(Sample& s, const DatasetOptions& o, diff::Rng& r) {
    const std::size_t w = o.input_width, h = o.input_height, nj = s.joint_cells.size();
    s.image.assign(nj * h * w, 0.0);
    const double kx = static_cast<double>(w) / o.layout.width, ky = static_cast<double>(h) / o.layout.height;
    for (std::size_t j = 0; j < nj; ++j) {
        const double px = s.joint_cells[j][0] * kx, py = s.joint_cells[j][1] * ky;
        const double amp = 0.3 + 0.7 * s.joint_cells[j][2] / static_cast<double>(o.layout.depth);
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const double dx = x - px, dy = y - py;
                s.image[(j * h + y) * w + x] =
                    amp * std::exp(-(dx * dx + dy * dy) / (2 * o.blob_sigma * o.blob_sigma)) + r.normal(0.0, o.noise_sd);
            }
    }
}

std::vector<mesh::Vec3> points(const Tensor& t, std::size_t row) {
    const std::size_t n = t.size(1);
    std::vector<mesh::Vec3> out(n);
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) out[i][c] = t[(row * n + i) * 3 + c];
    return out;
}

void append(std::vector<double>& dst, const std::vector<mesh::Vec3>& pts) {
    for (const auto& p : pts) dst.insert(dst.end(), p.begin(), p.end());
}

std::vector<mesh::Vec3> read_points(const diff::NamedArray& a, std::size_t row) {
    const std::size_t n = a.shape[1];
    std::vector<mesh::Vec3> out(n);
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) out[i][c] = a.values[(row * n + i) * 3 + c];
    return out;
}

}  // namespace

Dataset generate_dataset(const ToyTemplate& tmpl, const DatasetOptions& o) {
    if (o.count < 1) throw Error("generate_dataset: count must be >= 1");
    o.layout.validate();
    Dataset data{o, {}};
    diff::Rng rng(o.seed);
    const std::size_t nj = tmpl.joints();
    std::size_t attempts = 0;
    const heatmap::HeatmapLayout& l = o.layout;
    while (data.samples.size() < o.count) {
        if (++attempts > 100 * o.count) {
            throw Error("generate_dataset: rejected " + std::to_string(attempts - 1) +
                        " poses; the volume is too small for the template");
        }
        Sample s;
        s.pose = sample_pose(rng, nj);
        const mesh::Vec3 root{rng.uniform(-150, 150), rng.uniform(-150, 150),
                              rng.uniform(o.root_depth_min, o.root_depth_max)};
        auto posed = pose_template(tmpl, diff::Tensor::from({1, nj, 3}, s.pose));
        s.mesh_mm = points(posed.vertices, 0);
        s.joints_mm = points(posed.joints, 0);
        for (auto* set : {&s.mesh_mm, &s.joints_mm})
            for (auto& p : *set)
                for (int c = 0; c < 3; ++c) p[c] += root[c];
        s.camera = crop_camera(o, root);
        s.mesh_cells = mesh::to_points(camera::encode_to_cells(mesh::from_points(s.mesh_mm), s.camera, l));
        s.joint_cells = mesh::to_points(camera::encode_to_cells(mesh::from_points(s.joints_mm), s.camera, l));
        bool inside = true;
        const double lim[3] = {static_cast<double>(l.width), static_cast<double>(l.height), static_cast<double>(l.depth)};
        for (const auto& p : s.mesh_cells)
            for (int c = 0; c < 3; ++c)
                if (p[c] < o.border_cells || p[c] > lim[c] - 1.0 - o.border_cells) inside = false;
        if (!inside) continue;
        render_blobs(s, o, rng);
        data.samples.push_back(std::move(s));
    }
    return data;
}

net::Batch make_batch(const Dataset& data, const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw Error("make_batch: no samples");
    const auto& first = data.samples.at(indices[0]);
    const std::size_t nj = first.joint_cells.size(), nv = first.mesh_cells.size();
    const std::size_t h = data.options.input_height, w = data.options.input_width;
    std::vector<double> img, joints, verts;
    net::Batch b;
    for (auto i : indices) {
        const auto& s = data.samples.at(i);
        img.insert(img.end(), s.image.begin(), s.image.end());
        append(joints, s.joint_cells);
        append(verts, s.mesh_cells);
        b.cameras.push_back(s.camera);
    }
    const std::size_t n = indices.size();
    b.image = diff::Tensor::from({n, nj, h, w}, std::move(img));
    b.joints = diff::Tensor::from({n, nj, 3}, std::move(joints));
    b.mesh = diff::Tensor::from({n, nv, 3}, std::move(verts));
    return b;
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
    if (data.samples.empty()) throw Error("save_dataset: empty dataset");
    const auto& o = data.options;
    const std::size_t n = data.size(), nj = data.samples[0].joint_cells.size(), nv = data.samples[0].mesh_cells.size();
    diff::Checkpoint ck;
    std::vector<double> img, mc, jc, mm, jm, pose, cams;
    for (const auto& s : data.samples) {
        img.insert(img.end(), s.image.begin(), s.image.end());
        append(mc, s.mesh_cells);
        append(jc, s.joint_cells);
        append(mm, s.mesh_mm);
        append(jm, s.joints_mm);
        pose.insert(pose.end(), s.pose.begin(), s.pose.end());
        cams.push_back(s.camera.fx);
        cams.push_back(s.camera.fy);
        cams.push_back(s.camera.cx);
        cams.push_back(s.camera.cy);
        cams.insert(cams.end(), s.camera.affine.begin(), s.camera.affine.end());
        cams.push_back(s.camera.depth_span);
        cams.push_back(s.camera.root_depth);
    }
    ck.arrays = {{"images", {n, nj, o.input_height, o.input_width}, std::move(img)},
                 {"mesh_cells", {n, nv, 3}, std::move(mc)},
                 {"joint_cells", {n, nj, 3}, std::move(jc)},
                 {"mesh_mm", {n, nv, 3}, std::move(mm)},
                 {"joints_mm", {n, nj, 3}, std::move(jm)},
                 {"pose", {n, nj, 3}, std::move(pose)},
                 {"cameras", {n, 12}, std::move(cams)}};
    ck.meta = {{"kind", "lixelkit-dataset"},
               {"seed", o.seed},
               {"layout", heatmap::to_string(o.layout.kind)},
               {"width", o.layout.width},
               {"height", o.layout.height},
               {"depth", o.layout.depth},
               {"input_width", o.input_width},
               {"input_height", o.input_height},
               {"depth_span", o.depth_span},
               {"focal", o.focal},
               {"image_size", o.image_size},
               {"blob_sigma", o.blob_sigma},
               {"noise_sd", o.noise_sd}};
    diff::write_checkpoint(path, ck);
}

Dataset load_dataset(const std::filesystem::path& path) {
    const auto ck = diff::read_checkpoint(path);
    if (ck.meta.value("kind", "") != "lixelkit-dataset") throw Error("load_dataset: " + path.string() + " is not a dataset file");
    Dataset d;
    auto& o = d.options;
    try {
        o.seed = ck.meta.at("seed").get<std::uint64_t>();
        o.layout = {heatmap::parse_layout_kind(ck.meta.at("layout").get<std::string>()), ck.meta.at("width").get<std::size_t>(),
                    ck.meta.at("height").get<std::size_t>(), ck.meta.at("depth").get<std::size_t>()};
        o.input_width = ck.meta.at("input_width").get<std::size_t>();
        o.input_height = ck.meta.at("input_height").get<std::size_t>();
        o.depth_span = ck.meta.at("depth_span").get<double>();
        o.focal = ck.meta.at("focal").get<double>();
        o.image_size = ck.meta.at("image_size").get<double>();
        o.blob_sigma = ck.meta.at("blob_sigma").get<double>();
        o.noise_sd = ck.meta.at("noise_sd").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("load_dataset: bad manifest: ") + e.what());
    }
    const auto& images = ck.at("images");
    const auto& cams = ck.at("cameras");
    const std::size_t n = images.shape[0], plane = images.values.size() / n;
    const std::size_t nj = images.shape[1];
    o.count = n;
    for (std::size_t i = 0; i < n; ++i) {
        Sample s;
        s.image.assign(images.values.begin() + i * plane, images.values.begin() + (i + 1) * plane);
        s.mesh_cells = read_points(ck.at("mesh_cells"), i);
        s.joint_cells = read_points(ck.at("joint_cells"), i);
        s.mesh_mm = read_points(ck.at("mesh_mm"), i);
        s.joints_mm = read_points(ck.at("joints_mm"), i);
        const auto& pv = ck.at("pose").values;
        s.pose.assign(pv.begin() + i * nj * 3, pv.begin() + (i + 1) * nj * 3);
        const double* c = cams.values.data() + i * 12;
        s.camera.fx = c[0];
        s.camera.fy = c[1];
        s.camera.cx = c[2];
        s.camera.cy = c[3];
        std::copy(c + 4, c + 10, s.camera.affine.begin());
        s.camera.depth_span = c[10];
        s.camera.root_depth = c[11];
        s.camera.input_width = o.input_width;
        s.camera.input_height = o.input_height;
        s.camera.validate();
        d.samples.push_back(std::move(s));
    }
    return d;
}

}  // namespace lixelkit::exp
