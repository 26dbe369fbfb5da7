#pragma once

#include <filesystem>
#include <vector>

#include "lixelkit/camera/camera.hpp"
#include "lixelkit/experiments/template.hpp"
#include "lixelkit/network/heads.hpp"

namespace lixelkit::exp {

struct DatasetOptions {
    std::size_t count = 256;
    std::uint64_t seed = 7;
    /// Network input and heatmap volume.
    std::size_t input_width = 64;
    std::size_t input_height = 64;
    heatmap::HeatmapLayout layout{heatmap::LayoutKind::lixel_xyz, 32, 32, 32};
    double depth_span = 2000.0;
    double root_depth_min = 4000.0;
    double root_depth_max = 6000.0;
    /// Original camera: focal length and image size in pixels.
    double focal = 1500.0;
    double image_size = 1000.0;
    /// Joint blobs in the input image.
    double blob_sigma = 2.0;
    double noise_sd = 0.02;
    /// Rejected poses leave at least this many cells to every border.
    double border_cells = 0.5;
};

struct Sample {
    std::vector<double> image;           // [J, H, W]
    std::vector<mesh::Vec3> mesh_cells;  // [V]
    std::vector<mesh::Vec3> joint_cells; // [J]
    std::vector<mesh::Vec3> mesh_mm;     // camera frame
    std::vector<mesh::Vec3> joints_mm;
    std::vector<double> pose;            // [J * 3] axis-angle
    camera::CameraFrame camera;
};

struct Dataset {
    DatasetOptions options;
    std::vector<Sample> samples;

    std::size_t size() const { return samples.size(); }
};

/// Random joint rotations through forward kinematics and rigid skinning,
/// projected into a crop centered on the root. Throws after 100 * count
/// rejected poses.
Dataset generate_dataset(const ToyTemplate& tmpl, const DatasetOptions& options);

/// Stacks the chosen samples into network tensors.
net::Batch make_batch(const Dataset& data, const std::vector<std::size_t>& indices);

void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace lixelkit::exp
