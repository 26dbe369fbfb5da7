#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "lixelkit/diffcore/tensor.hpp"

namespace lixelkit::heatmap {

/// Debug dump of one heatmap array:
///
///   line 1   JSON header terminated by '\n':
///            {"format": "lixelkit-heatmap", "version": 1, "name", "layout",
///             "sigma", "shape", "dtype": "f64le", "payload_bytes"}
///   rest     raw little-endian float64 values, row-major in `shape` order.
///
/// Several arrays may be concatenated in one file; each starts with its own
/// header line.
struct HeatmapDump {
    std::string name;
    std::string layout;
    double sigma = 0.0;
    diff::Shape shape;
    std::vector<double> values;
};

void write_heatmap_dumps(const std::filesystem::path& path, const std::vector<HeatmapDump>& dumps);
std::vector<HeatmapDump> read_heatmap_dumps(const std::filesystem::path& path);

/// 8-bit grayscale PNG of a [height, width] array, linearly mapped so the
/// maximum becomes 255 (all-zero input stays black).
void write_png_gray(const std::filesystem::path& path, std::size_t width, std::size_t height,
                    const std::vector<double>& values);

}  // namespace lixelkit::heatmap
