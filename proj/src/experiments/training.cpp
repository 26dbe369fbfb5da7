#include "lixelkit/experiments/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "lixelkit/camera/camera.hpp"
#include "lixelkit/diffcore/checkpoint.hpp"
#include "lixelkit/diffcore/ops.hpp"
#include "lixelkit/diffcore/rng.hpp"
#include "lixelkit/meshgeom/metrics.hpp"

namespace lixelkit::exp {

namespace {

constexpr std::size_t kEvalBatch = 16;
constexpr const char* kCheckpointKind = "lixelkit-checkpoint";

std::vector<mesh::Vec3> sample_points(const Tensor& t, std::size_t b) {
    const std::size_t n = t.size(1);
    std::vector<mesh::Vec3> out(n);
    const auto d = t.data();
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) out[i][c] = d[(b * n + i) * 3 + c];
    return out;
}

double loss_value(const Tensor& t) { return t.defined() ? t.item() : 0.0; }

void dump_failure(const ExperimentConfig& cfg, std::uint64_t seed, std::size_t step,
                  const std::vector<std::size_t>& indices, const Dataset& train, const net::ForwardResult* out,
                  const std::string& reason) {
    nlohmann::json j;
    j["reason"] = reason;
    j["experiment"] = cfg.id;
    j["seed"] = seed;
    j["step"] = step;
    j["batch_indices"] = indices;
    if (out) {
        for (const auto& [name, value] : out->losses.values())
            j["losses"][name] = std::isfinite(value) ? nlohmann::json(value) : nlohmann::json(std::to_string(value));
    }
    for (auto i : indices) j["poses"].push_back(train.samples[i].pose);
    std::filesystem::create_directories(cfg.output_dir);
    const auto path = cfg.output_dir / (cfg.id + "_seed" + std::to_string(seed) + "_step" + std::to_string(step) + "_failure.json");
    std::ofstream(path) << j.dump(2) << "\n";
    throw Error("training aborted at step " + std::to_string(step) + ": " + reason + " (diagnostics in " + path.string() + ")");
}

}  // namespace

Datasets make_datasets(const ExperimentConfig& cfg, const ToyTemplate& tmpl) {
    return {generate_dataset(tmpl, cfg.dataset_options(cfg.train_samples, diff::mix_seed(cfg.data_seed, 1))),
            generate_dataset(tmpl, cfg.dataset_options(cfg.eval_samples, diff::mix_seed(cfg.data_seed, 2)))};
}

net::ParametricDecoder make_parametric_decoder(const ToyTemplate& tmpl, const heatmap::HeatmapLayout& layout) {
    const std::size_t nj = tmpl.joints();
    net::ParametricDecoder d;
    d.param_count = nj * 3 + 3;
    d.decode = [&tmpl, layout, nj](const Tensor& params, const net::Batch& batch) {
        const std::size_t b = params.size(0);
        const auto posed = pose_template(tmpl, diff::reshape(diff::narrow(params, 1, 0, nj * 3), {b, nj, 3}));
        const auto center = Tensor::from({1, 3}, {layout.width / 2.0, layout.height / 2.0, layout.depth / 2.0});
        std::vector<Tensor> out;
        for (std::size_t i = 0; i < b; ++i) {
            const auto root_cells = diff::narrow(diff::narrow(params, 0, i, 1), 1, nj * 3, 3) + center;
            const auto root_mm = camera::recover_mesh(root_cells, batch.cameras.at(i), layout);
            const auto verts = diff::reshape(diff::narrow(posed.vertices, 0, i, 1), {tmpl.vertices(), 3}) + root_mm;
            out.push_back(camera::encode_to_cells(verts, batch.cameras.at(i), layout));
        }
        return diff::stack(out, 0);
    };
    return d;
}

EvalResult score_cells(const Tensor& cells, const Dataset& data, const std::vector<std::size_t>& indices,
                       const ToyTemplate& tmpl, EvalResult running) {
    double sum_j = running.mpjpe * running.samples, sum_pa = running.pa_mpjpe * running.samples;
    double sum_v = running.vertex_error * running.samples;
    const auto& layout = data.options.layout;
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const auto& s = data.samples.at(indices[b]);
        const auto pred_mm = camera::recover_mesh(mesh::from_points(sample_points(cells, b)), s.camera, layout);
        const auto pred_joints = mesh::to_points(mesh::regress_joints(tmpl.regressor, pred_mm));
        const auto gt_joints = mesh::to_points(mesh::regress_joints(tmpl.regressor, mesh::from_points(s.mesh_mm)));
        sum_j += mesh::mpjpe(pred_joints, gt_joints, 0);
        sum_pa += mesh::pa_mpjpe(pred_joints, gt_joints);
        const auto pv = mesh::to_points(pred_mm);
        double acc = 0.0;
        for (std::size_t v = 0; v < pv.size(); ++v) {
            double d2 = 0.0;
            for (int c = 0; c < 3; ++c) {
                const double d = (pv[v][c] - pred_joints[0][c]) - (s.mesh_mm[v][c] - gt_joints[0][c]);
                d2 += d * d;
            }
            acc += std::sqrt(d2);
        }
        sum_v += acc / pv.size();
    }
    EvalResult r;
    r.samples = running.samples + indices.size();
    r.mpjpe = sum_j / r.samples;
    r.pa_mpjpe = sum_pa / r.samples;
    r.vertex_error = sum_v / r.samples;
    return r;
}

EvalResult measure_noise_floor(const Dataset& data, const ToyTemplate& tmpl, double sigma) {
    const auto& l = data.options.layout;
    EvalResult r;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto gt = mesh::from_points(data.samples[i].mesh_cells);
        const std::size_t len[3] = {l.width, l.height, l.depth};
        std::vector<Tensor> axes;
        for (int c = 0; c < 3; ++c) {
            const auto centers = diff::reshape(diff::narrow(gt, 1, c, 1), {gt.size(0)});
            const auto probs = heatmap::normalize_rows(heatmap::render_gaussian_1d(centers, len[c], sigma));
            axes.push_back(heatmap::expectation_1d(probs));
        }
        const auto decoded = diff::reshape(diff::stack(axes, 1), {1, gt.size(0), 3});
        r = score_cells(decoded, data, {i}, tmpl, r);
    }
    return r;
}

std::vector<std::size_t> batch_indices(std::size_t n, std::size_t batch, std::uint64_t seed, std::size_t step) {
    if (batch > n) throw Error("batch_indices: batch larger than the dataset");
    diff::Rng rng(diff::mix_seed(seed, step));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < batch; ++i) std::swap(idx[i], idx[i + rng.index(n - i)]);
    idx.resize(batch);
    return idx;
}

Trainer::Trainer(ExperimentConfig cfg, std::uint64_t seed, const ToyTemplate& tmpl, std::string variant)
    : cfg_(std::move(cfg)), seed_(seed), tmpl_(&tmpl), variant_(std::move(variant)) {
    cfg_.validate();
    const auto ncfg = cfg_.network(tmpl);
    net::ParametricDecoder decoder;
    if (ncfg.representation == net::Representation::parametric) decoder = make_parametric_decoder(tmpl, ncfg.mesh_layout());
    model_ = std::make_unique<net::Model>(ncfg, tmpl.topology(), seed, std::move(decoder));
    adam_.lr = cfg_.learning_rate;
    adam_.beta1 = cfg_.beta1;
    adam_.beta2 = cfg_.beta2;
}

ResultRow Trainer::train_step(const Dataset& train) {
    const std::size_t step = adam_.step;
    const auto idx = batch_indices(train.size(), cfg_.batch_size, seed_, step);
    const auto batch = make_batch(train, idx);
    auto& params = model_->params();
    adam_.lr = cfg_.learning_rate;
    if (cfg_.lr_decay_step > 0 && step >= cfg_.lr_decay_step) adam_.lr *= cfg_.lr_decay_factor;
    params.zero_grad();
    net::ForwardResult out;
    try {
        out = model_->forward(batch, true, cfg_.loss);
    } catch (const Error& e) {
        dump_failure(cfg_, seed_, step, idx, train, nullptr, e.what());
    }
    const double total = out.total.item();
    if (!std::isfinite(total)) dump_failure(cfg_, seed_, step, idx, train, &out, "non-finite loss");
    out.total.backward();
    try {
        diff::adam_step(params.params(), adam_);
    } catch (const Error& e) {
        dump_failure(cfg_, seed_, step, idx, train, &out, e.what());
    }
    ResultRow row;
    row.experiment = cfg_.id;
    row.variant = variant_;
    row.seed = seed_;
    row.step = adam_.step;
    row.loss_total = total;
    row.loss_pose_posenet = loss_value(out.losses.pose_posenet);
    row.loss_pose_meshnet = loss_value(out.losses.pose_meshnet);
    row.loss_vertex = loss_value(out.losses.vertex);
    row.loss_normal = loss_value(out.losses.normal);
    row.loss_edge = loss_value(out.losses.edge);
    row.parameters = params.count();
    row.head_parameters = model_->mesh_head_parameters();
    row.cells = model_->config().mesh_cells();
    return row;
}

EvalResult Trainer::evaluate(const Dataset& data) {
    EvalResult r;
    for (std::size_t start = 0; start < data.size(); start += kEvalBatch) {
        std::vector<std::size_t> idx;
        for (std::size_t i = start; i < std::min(data.size(), start + kEvalBatch); ++i) idx.push_back(i);
        const auto out = model_->forward(make_batch(data, idx), false, cfg_.loss);
        r = score_cells(out.mesh.coords, data, idx, *tmpl_, r);
    }
    return r;
}

std::vector<mesh::Vec3> Trainer::predict_mesh(const Dataset& data, std::size_t index) {
    const auto out = model_->forward(make_batch(data, {index}), false, cfg_.loss);
    const auto cells = diff::reshape(out.mesh.coords, {tmpl_->vertices(), 3});
    return mesh::to_points(camera::recover_mesh(cells, data.samples.at(index).camera, data.options.layout));
}

void Trainer::save(const std::filesystem::path& path) const {
    diff::Checkpoint ck;
    ck.arrays = model_->state();
    const auto params = model_->params().params();
    for (std::size_t i = 0; i < adam_.first_moment.size(); ++i) {
        const auto& shape = params[i].value.shape();
        ck.arrays.push_back({"adam.m." + params[i].name, shape, adam_.first_moment[i]});
        ck.arrays.push_back({"adam.v." + params[i].name, shape, adam_.second_moment[i]});
    }
    ck.meta = {{"kind", kCheckpointKind}, {"config", to_text(cfg_)}, {"seed", seed_},
               {"variant", variant_},     {"step", adam_.step},       {"format", 1}};
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    diff::write_checkpoint(path, ck);
}

void Trainer::load(const std::filesystem::path& path) {
    const auto ck = diff::read_checkpoint(path);
    if (ck.meta.value("kind", "") != kCheckpointKind) throw Error("checkpoint " + path.string() + ": not a training checkpoint");
    if (ck.meta.value("config", "") != to_text(cfg_))
        throw Error("checkpoint " + path.string() + ": written with a different configuration");
    std::vector<diff::NamedArray> model_arrays;
    for (const auto& a : ck.arrays)
        if (a.name.rfind("adam.", 0) != 0) model_arrays.push_back(a);
    model_->load_state(model_arrays);
    adam_.step = ck.meta.at("step").get<std::size_t>();
    adam_.first_moment.clear();
    adam_.second_moment.clear();
    if (adam_.step > 0) {
        for (const auto& p : model_->params().params()) {
            adam_.first_moment.push_back(ck.at("adam.m." + p.name).values);
            adam_.second_moment.push_back(ck.at("adam.v." + p.name).values);
        }
    }
    seed_ = ck.meta.at("seed").get<std::uint64_t>();
    variant_ = ck.meta.value("variant", variant_);
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
    const auto ck = diff::read_checkpoint(path);
    if (ck.meta.value("kind", "") != kCheckpointKind) throw Error("checkpoint " + path.string() + ": not a training checkpoint");
    CheckpointInfo info;
    info.cfg = parse_config(ck.meta.at("config").get<std::string>(), path.string() + " (embedded config)");
    info.seed = ck.meta.at("seed").get<std::uint64_t>();
    info.variant = ck.meta.value("variant", "default");
    info.step = ck.meta.at("step").get<std::size_t>();
    return info;
}

std::vector<ResultRow> run_training(const ExperimentConfig& cfg, std::uint64_t seed, const ToyTemplate& tmpl,
                                    const Datasets& data, const RunOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    Trainer trainer(cfg, seed, tmpl, options.variant);
    if (!options.resume_from.empty()) trainer.load(options.resume_from);
    const std::size_t last = options.stop_after ? std::min(options.stop_after, cfg.steps) : cfg.steps;
    std::vector<ResultRow> rows;
    while (trainer.steps_done() < last) {
        auto row = trainer.train_step(data.train);
        if (row.step % cfg.eval_every == 0 || row.step == cfg.steps) {
            row.eval = trainer.evaluate(data.eval);
            row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            if (options.on_row) options.on_row(row);
            rows.push_back(row);
        }
    }
    if (!options.checkpoint_out.empty()) trainer.save(options.checkpoint_out);
    return rows;
}

}  // namespace lixelkit::exp
