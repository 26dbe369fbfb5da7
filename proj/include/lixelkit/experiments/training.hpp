#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "lixelkit/diffcore/adam.hpp"
#include "lixelkit/experiments/config_file.hpp"
#include "lixelkit/experiments/dataset.hpp"
#include "lixelkit/network/model.hpp"

namespace lixelkit::exp {

struct EvalResult {
    double mpjpe = 0.0;     // mm, mesh-regressed joints, root-aligned
    double pa_mpjpe = 0.0;  // mm, after similarity alignment
    double vertex_error = 0.0;  // mean vertex distance in mm, root-aligned
    std::size_t samples = 0;
};

/// One line of a metrics table.
struct ResultRow {
    std::string experiment;
    std::string variant;
    std::uint64_t seed = 0;
    std::size_t step = 0;
    /// Loss of the training step just taken; undefined terms are 0.
    double loss_total = 0.0;
    double loss_pose_posenet = 0.0;
    double loss_pose_meshnet = 0.0;
    double loss_vertex = 0.0;
    double loss_normal = 0.0;
    double loss_edge = 0.0;
    EvalResult eval;
    std::size_t parameters = 0;
    std::size_t head_parameters = 0;
    std::uint64_t cells = 0;
    /// Seconds since the run started. Kept out of the CSV so tables stay reproducible.
    double wall_seconds = 0.0;
};

struct Datasets {
    Dataset train;
    Dataset eval;
};

/// Training and held-out splits drawn from independent streams of data_seed.
Datasets make_datasets(const ExperimentConfig& cfg, const ToyTemplate& tmpl);

/// Parameters of the parametric stand-in: per-joint axis-angle followed by a
/// root offset in cells from the volume center.
net::ParametricDecoder make_parametric_decoder(const ToyTemplate& tmpl, const heatmap::HeatmapLayout& layout);

/// Evaluation of groundtruth cells pushed through 1-D Gaussian rendering
/// and soft decoding: the error no heatmap prediction can beat.
EvalResult measure_noise_floor(const Dataset& data, const ToyTemplate& tmpl, double sigma);

/// Mesh metrics of predicted cells [B, V, 3] against the given samples.
EvalResult score_cells(const Tensor& cells, const Dataset& data, const std::vector<std::size_t>& indices,
                       const ToyTemplate& tmpl, EvalResult running = {});

/// Training state of one (config, seed) run.
class Trainer {
public:
    Trainer(ExperimentConfig cfg, std::uint64_t seed, const ToyTemplate& tmpl, std::string variant = "default");

    /// One optimizer step on a batch drawn from `train` by (seed, step).
    /// A non-finite loss or gradient writes a diagnostic dump to the output
    /// directory and throws.
    ResultRow train_step(const Dataset& train);
    EvalResult evaluate(const Dataset& data);
    /// Predicted mesh of one sample in camera-frame millimeters.
    std::vector<mesh::Vec3> predict_mesh(const Dataset& data, std::size_t index);

    std::size_t steps_done() const { return adam_.step; }
    net::Model& model() { return *model_; }
    const ExperimentConfig& config() const { return cfg_; }
    std::uint64_t seed() const { return seed_; }

    /// Model state, optimizer moments and the run manifest.
    void save(const std::filesystem::path& path) const;
    /// Restores a checkpoint written by save(); the config must match.
    void load(const std::filesystem::path& path);

private:
    ExperimentConfig cfg_;
    std::uint64_t seed_;
    const ToyTemplate* tmpl_;
    std::string variant_;
    std::unique_ptr<net::Model> model_;
    diff::AdamState adam_;
};

/// Indices of the batch used at `step`, sampled without replacement.
std::vector<std::size_t> batch_indices(std::size_t n, std::size_t batch, std::uint64_t seed, std::size_t step);

struct RunOptions {
    std::string variant = "default";
    std::filesystem::path resume_from;
    std::filesystem::path checkpoint_out;
    /// Stop after this many total steps (0: the configured budget).
    std::size_t stop_after = 0;
    std::function<void(const ResultRow&)> on_row;
};

/// Rows at every eval_every steps and at the end of the budget.
std::vector<ResultRow> run_training(const ExperimentConfig& cfg, std::uint64_t seed, const ToyTemplate& tmpl,
                                    const Datasets& data, const RunOptions& options = {});

/// Reads the manifest of a checkpoint written by Trainer::save.
struct CheckpointInfo {
    ExperimentConfig cfg;
    std::uint64_t seed = 0;
    std::string variant;
    std::size_t step = 0;
};
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

}  // namespace lixelkit::exp
