#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lixelkit/experiments/dataset.hpp"
#include "lixelkit/experiments/template.hpp"
#include "lixelkit/meshgeom/losses.hpp"
#include "lixelkit/network/config.hpp"

namespace lixelkit::exp {

/// Network defaults for experiments: a 2x2 deep feature map and 16 cells per
/// axis, small enough to train a few thousand steps per run on one core.
net::NetConfig toy_network();

/// Everything a training run or ablation reads from its config file.
/// The network input, heatmap layout and joint/vertex counts are derived
/// from `net` and the template, never set twice.
struct ExperimentConfig {
    std::string id = "toy";
    net::NetConfig net = toy_network();
    mesh::LossWeights loss;
    TemplateOptions shape;
    DatasetOptions data;  // count, layout and input size are overwritten

    std::size_t train_samples = 512;
    std::size_t eval_samples = 64;
    std::uint64_t data_seed = 7;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};

    std::size_t steps = 3000;
    std::size_t batch_size = 8;
    std::size_t eval_every = 500;
    double learning_rate = 3e-3;
    /// The learning rate is multiplied by lr_decay_factor from this step on (0: never).
    std::size_t lr_decay_step = 2400;
    double lr_decay_factor = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;

    std::filesystem::path output_dir = "runs";

    /// Throws naming the offending key.
    void validate() const;
    /// Network config with joint, vertex and input channel counts taken from the template.
    net::NetConfig network(const ToyTemplate& tmpl) const;
    /// Dataset options with the derived fields filled in.
    DatasetOptions dataset_options(std::size_t count, std::uint64_t seed) const;
};

/// `key = value` lines, `#` starts a comment, lists are comma separated.
/// Unknown keys and malformed values are errors carrying the line number.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical text form; parse_config(to_text(c)) reproduces c.
std::string to_text(const ExperimentConfig& cfg);

/// Applies one `key = value` override on top of an existing config.
void set_option(ExperimentConfig& cfg, const std::string& key, const std::string& value);

}  // namespace lixelkit::exp
