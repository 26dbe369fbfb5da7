#include "lixelkit/network/config.hpp"

#include <string>

namespace lixelkit::net {

namespace {

template <class E, std::size_t N>
E parse_enum(const std::string& s, const std::pair<const char*, E> (&table)[N], const char* what) {
    for (const auto& [name, value] : table)
        if (s == name) return value;
    std::string options;
    for (const auto& [name, value] : table) options += std::string(options.empty() ? "" : ", ") + name;
    throw Error(std::string("unknown ") + what + " '" + s + "' (expected one of: " + options + ")");
}

template <class E, std::size_t N>
std::string name_of(E v, const std::pair<const char*, E> (&table)[N]) {
    for (const auto& [name, value] : table)
        if (v == value) return name;
    return "unknown";
}

constexpr std::pair<const char*, Cascade> kCascades[] = {{"mesh_only", Cascade::mesh_only},
                                                         {"pose_then_mesh", Cascade::pose_then_mesh},
                                                         {"gt_pose_to_mesh", Cascade::gt_pose_to_mesh}};
constexpr std::pair<const char*, MarginalStage> kStages[] = {{"late", MarginalStage::late},
                                                             {"early", MarginalStage::early}};
constexpr std::pair<const char*, Representation> kReps[] = {{"coord_regression", Representation::coord_regression},
                                                            {"fc_lixel", Representation::fc_lixel},
                                                            {"conv_lixel", Representation::conv_lixel},
                                                            {"parametric", Representation::parametric}};
constexpr std::pair<const char*, InitScheme> kInits[] = {{"gaussian_1e-3", InitScheme::gaussian_1e3},
                                                         {"kaiming", InitScheme::kaiming}};

}  // namespace

std::string to_string(Cascade v) { return name_of(v, kCascades); }
std::string to_string(MarginalStage v) { return name_of(v, kStages); }
std::string to_string(Representation v) { return name_of(v, kReps); }
std::string to_string(InitScheme v) { return name_of(v, kInits); }
Cascade parse_cascade(const std::string& s) { return parse_enum(s, kCascades, "cascade mode"); }
MarginalStage parse_marginal_stage(const std::string& s) { return parse_enum(s, kStages, "marginalization stage"); }
Representation parse_representation(const std::string& s) { return parse_enum(s, kReps, "representation"); }
InitScheme parse_init(const std::string& s) { return parse_enum(s, kInits, "init scheme"); }

std::uint64_t NetConfig::mesh_cells() const { return mesh_layout().cells_per_landmark() * vertices; }

void NetConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error("network config: " + msg); };
    if (joints < 1) fail("joints must be >= 1");
    if (vertices < 3) fail("vertices must be >= 3 (got " + std::to_string(vertices) + ")");
    if (depth < 2) fail("depth must be >= 2");
    if (deep_h < 1 || deep_w < 1) fail("deep feature size must be positive");
    if (in_channels < 1 || stem_channels < 1 || head_channels < 1 || fuse_channels < 1 || fc_hidden < 1)
        fail("channel counts must be positive");
    if (trunk_channels.size() != 3) fail("trunk_channels needs exactly 3 entries (one per strided block)");
    for (auto c : trunk_channels)
        if (c < 1) fail("trunk channel counts must be positive");
    if (!(sigma > 0.0)) fail("sigma must be positive");
    mesh_layout().validate();
    if (marginalize_stage == MarginalStage::early && layout != heatmap::LayoutKind::lixel_xyz)
        fail("early marginalization only applies to lixel heads");
    if (layout != heatmap::LayoutKind::lixel_xyz && representation != Representation::conv_lixel)
        fail("pixel and voxel layouts need the convolutional head");
    if (representation != Representation::conv_lixel && cascade != Cascade::mesh_only)
        fail("alternative mesh representations run in mesh_only mode");
    const std::uint64_t cells = mesh_cells();
    if (cells > cell_budget) {
        fail(heatmap::to_string(layout) + " heatmap at " + std::to_string(early_w()) + "x" + std::to_string(early_h()) +
             "x" + std::to_string(depth) + " needs " + std::to_string(cells) + " cells per sample, over the budget of " +
             std::to_string(cell_budget));
    }
}

}  // namespace lixelkit::net
