#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "lixelkit/diffcore/tensor.hpp"

namespace lixelkit::diff {

/// Checkpoint file layout (all integers little-endian):
///
///   bytes [0, 8)        magic "LXCKPT01"
///   bytes [8, 16)       uint64 manifest length M
///   bytes [16, 16+M)    UTF-8 JSON manifest
///   bytes [16+M, end)   payload of float64 arrays
///
/// The manifest is {"format": "lixelkit-checkpoint", "version": 1,
/// "arrays": [{"name", "shape", "offset", "count"}...], "meta": {...}} with
/// each offset counted in bytes from the start of the payload.
struct NamedArray {
    std::string name;
    Shape shape;
    std::vector<double> values;
};

struct Checkpoint {
    std::vector<NamedArray> arrays;
    nlohmann::json meta = nlohmann::json::object();

    const NamedArray* find(const std::string& name) const;
    const NamedArray& at(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace lixelkit::diff
