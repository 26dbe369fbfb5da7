#include <limits>

#include "lixelkit/heatmap/heatmap.hpp"

namespace lixelkit::heatmap {

namespace {

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
    if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) throw Error("memory_cells: cell count overflows");
    return a * b;
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
    if (b > std::numeric_limits<std::uint64_t>::max() - a) throw Error("memory_cells: cell count overflows");
    return a + b;
}

}  // namespace

std::uint64_t memory_cells(std::uint64_t vertices, std::uint64_t resolution, LayoutKind kind) {
    if (vertices == 0 || resolution == 0) throw Error("memory_cells: V and D must be >= 1");
    switch (kind) {
        case LayoutKind::lixel_xyz: return checked_mul(checked_mul(3, vertices), resolution);
        case LayoutKind::pixel_xy_plus_lixel_z:
            return checked_mul(vertices, checked_add(checked_mul(resolution, resolution), resolution));
        case LayoutKind::voxel_xyz:
            return checked_mul(vertices, checked_mul(resolution, checked_mul(resolution, resolution)));
    }
    throw Error("memory_cells: unknown layout");
}

}  // namespace lixelkit::heatmap
