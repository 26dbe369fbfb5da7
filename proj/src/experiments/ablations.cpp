#include "lixelkit/experiments/ablations.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "lixelkit/heatmap/heatmap.hpp"

namespace lixelkit::exp {

namespace {

// Small heatmap volume shared by every layout in the layout study.
constexpr std::size_t kLayoutDeep = 1;
constexpr std::size_t kLayoutDepth = 8;

std::string fixed(double v, int digits) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

void add_variant(std::vector<AblationVariant>& out, std::vector<RefusedVariant>* refused, std::string name,
                 ExperimentConfig cfg) {
    try {
        cfg.validate();
    } catch (const Error& e) {
        if (!refused) throw;
        refused->push_back({name, e.what(), cfg.network(make_toy_template(cfg.shape)).mesh_cells()});
        return;
    }
    out.push_back({std::move(name), std::move(cfg)});
}

}  // namespace

std::string to_string(AblationKind k) {
    switch (k) {
        case AblationKind::representation: return "representation";
        case AblationKind::layout: return "layout";
        case AblationKind::cascade: return "cascade";
        case AblationKind::marginalization: return "marginalization";
    }
    return "?";
}

AblationKind parse_ablation(const std::string& s) {
    for (auto k : {AblationKind::representation, AblationKind::layout, AblationKind::cascade, AblationKind::marginalization})
        if (to_string(k) == s) return k;
    throw Error("unknown ablation '" + s + "' (expected representation, layout, cascade or marginalization)");
}

std::vector<AblationVariant> ablation_variants(AblationKind kind, const ExperimentConfig& base,
                                               std::vector<RefusedVariant>* refused) {
    std::vector<AblationVariant> out;
    switch (kind) {
        case AblationKind::representation:
            for (auto r : {net::Representation::coord_regression, net::Representation::fc_lixel,
                           net::Representation::conv_lixel, net::Representation::parametric}) {
                auto c = base;
                c.net.cascade = net::Cascade::mesh_only;
                c.net.representation = r;
                c.net.layout = heatmap::LayoutKind::lixel_xyz;
                add_variant(out, refused, net::to_string(r), c);
            }
            break;
        case AblationKind::layout:
            for (auto l : {heatmap::LayoutKind::lixel_xyz, heatmap::LayoutKind::pixel_xy_plus_lixel_z,
                           heatmap::LayoutKind::voxel_xyz}) {
                auto c = base;
                c.net.cascade = net::Cascade::mesh_only;
                c.net.representation = net::Representation::conv_lixel;
                c.net.marginalize_stage = net::MarginalStage::late;
                c.net.layout = l;
                c.net.deep_h = c.net.deep_w = kLayoutDeep;
                c.net.depth = kLayoutDepth;
                add_variant(out, refused, heatmap::to_string(l) + "@" + std::to_string(kLayoutDepth), c);
            }
            for (auto l : {heatmap::LayoutKind::pixel_xy_plus_lixel_z, heatmap::LayoutKind::voxel_xyz}) {
                auto c = base;
                c.net.cascade = net::Cascade::mesh_only;
                c.net.representation = net::Representation::conv_lixel;
                c.net.marginalize_stage = net::MarginalStage::late;
                c.net.layout = l;
                std::vector<AblationVariant> probe;
                std::vector<RefusedVariant> why;
                add_variant(probe, &why, heatmap::to_string(l) + "@" + std::to_string(c.net.depth), c);
                // Configs at the base resolution are only reported when they are refused.
                if (!why.empty()) {
                    if (!refused) throw Error(why.front().reason);
                    refused->push_back(why.front());
                }
            }
            break;
        case AblationKind::cascade:
            for (auto m : {net::Cascade::mesh_only, net::Cascade::pose_then_mesh, net::Cascade::gt_pose_to_mesh}) {
                auto c = base;
                c.net.cascade = m;
                c.net.representation = net::Representation::conv_lixel;
                add_variant(out, refused, net::to_string(m), c);
            }
            break;
        case AblationKind::marginalization:
            for (auto st : {net::MarginalStage::late, net::MarginalStage::early})
                for (auto m : {heatmap::MarginalMethod::avg, heatmap::MarginalMethod::max, heatmap::MarginalMethod::weighted_sum}) {
                    auto c = base;
                    c.net.marginalize_stage = st;
                    c.net.marginalize_method = m;
                    c.net.representation = net::Representation::conv_lixel;
                    c.net.layout = heatmap::LayoutKind::lixel_xyz;
                    add_variant(out, refused, net::to_string(st) + "-" + heatmap::to_string(m), c);
                }
            break;
    }
    return out;
}

std::string TrendCheck::describe() const {
    const char* v = verdict == Verdict::holds ? "holds" : verdict == Verdict::tie ? "tie" : "violated";
    return better + " <= " + worse + ": gap " + fixed(gap, 2) + " mm, SE " + fixed(standard_error, 2) + " mm -> " + v;
}

TrendCheck check_order(const VariantSummary& better, const VariantSummary& worse) {
    if (better.seeds != worse.seeds) throw Error("check_order: variants were run on different seeds");
    TrendCheck t;
    t.better = better.variant;
    t.worse = worse.variant;
    t.gap = worse.median_mpjpe() - better.median_mpjpe();
    std::vector<double> diff(better.mpjpe.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = worse.mpjpe[i] - better.mpjpe[i];
    t.standard_error = standard_error(diff);
    if (t.gap >= 0.0 && t.gap >= t.standard_error)
        t.verdict = TrendCheck::Verdict::holds;
    else if (t.gap >= -t.standard_error)
        t.verdict = TrendCheck::Verdict::tie;
    else
        t.verdict = TrendCheck::Verdict::violated;
    return t;
}

std::vector<MemoryRow> memory_table(std::uint64_t v, std::uint64_t d) {
    std::vector<MemoryRow> out;
    for (auto l : {heatmap::LayoutKind::lixel_xyz, heatmap::LayoutKind::pixel_xy_plus_lixel_z, heatmap::LayoutKind::voxel_xyz})
        out.push_back({l, v, d, heatmap::memory_cells(v, d, l)});
    return out;
}

const VariantSummary& AblationReport::summary(const std::string& variant) const {
    for (const auto& s : summaries)
        if (s.variant == variant) return s;
    throw Error("no results for variant '" + variant + "'");
}

AblationReport run_ablation(AblationKind kind, const ExperimentConfig& base, const AblationOptions& options) {
    AblationReport report;
    report.kind = kind;
    report.experiment = base.id;
    auto variants = ablation_variants(kind, base, &report.refused);
    if (!options.only.empty()) {
        std::erase_if(variants, [&](const AblationVariant& v) {
            return std::find(options.only.begin(), options.only.end(), v.name) == options.only.end();
        });
        if (variants.empty()) throw Error("run_ablation: no variant matches the requested names");
    }
    auto say = [&](const std::string& s) {
        if (options.progress) options.progress(s);
    };
    for (const auto& r : report.refused) say("refused " + r.name + ": " + r.reason);

    const auto tmpl = make_toy_template(base.shape);
    // Variants with the same input geometry share their datasets.
    std::string data_key;
    Datasets data;
    for (const auto& v : variants) {
        const auto key = std::to_string(v.cfg.net.deep_h) + "/" + std::to_string(v.cfg.net.depth);
        if (key != data_key) {
            data = make_datasets(v.cfg, tmpl);
            data_key = key;
            if (report.noise_floor.samples == 0) report.noise_floor = measure_noise_floor(data.eval, tmpl, v.cfg.net.sigma);
        }
        for (auto seed : v.cfg.seeds) {
            const auto t0 = std::chrono::steady_clock::now();
            RunOptions ro;
            ro.variant = v.name;
            auto rows = run_training(v.cfg, seed, tmpl, data, ro);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            say(v.name + " seed " + std::to_string(seed) + ": MPJPE " + fixed(rows.back().eval.mpjpe, 2) + " mm, PA-MPJPE " +
                fixed(rows.back().eval.pa_mpjpe, 2) + " mm (" + fixed(secs, 1) + " s)");
            report.rows.insert(report.rows.end(), rows.begin(), rows.end());
        }
    }
    report.summaries = summarize(report.rows);

    auto has = [&](const std::string& n) {
        return std::any_of(report.summaries.begin(), report.summaries.end(), [&](const auto& s) { return s.variant == n; });
    };
    if (kind == AblationKind::cascade) {
        if (has("gt_pose_to_mesh") && has("pose_then_mesh"))
            report.trends.push_back(check_order(report.summary("gt_pose_to_mesh"), report.summary("pose_then_mesh")));
        if (has("pose_then_mesh") && has("mesh_only"))
            report.trends.push_back(check_order(report.summary("pose_then_mesh"), report.summary("mesh_only")));
    }
    if (kind == AblationKind::representation && has("conv_lixel") && has("coord_regression"))
        report.trends.push_back(check_order(report.summary("conv_lixel"), report.summary("coord_regression")));
    if (kind == AblationKind::layout) {
        nlohmann::json full_scale;
        for (const auto& m : memory_table(6980, 64)) full_scale[heatmap::to_string(m.layout)] = m.cells;
        report.extra["cells_V6980_D64"] = full_scale;
        const std::uint64_t hi = std::max<std::uint64_t>(base.net.depth, kLayoutDepth);
        report.extra["lixel_at_highest_toy_resolution"] = heatmap::memory_cells(6980, hi, heatmap::LayoutKind::lixel_xyz);
        report.extra["voxel_at_lowest_toy_resolution"] = heatmap::memory_cells(6980, kLayoutDepth, heatmap::LayoutKind::voxel_xyz);
    }
    return report;
}

void write_report(const AblationReport& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto stem = r.experiment + "_" + to_string(r.kind);
    write_csv(dir / (stem + ".csv"), r.rows);

    nlohmann::json j;
    j["ablation"] = to_string(r.kind);
    j["experiment"] = r.experiment;
    j["noise_floor"] = to_json(r.noise_floor);
    for (const auto& s : r.summaries) {
        j["variants"].push_back({{"variant", s.variant},
                                 {"seeds", s.seeds},
                                 {"mpjpe", s.mpjpe},
                                 {"pa_mpjpe", s.pa_mpjpe},
                                 {"median_mpjpe", s.median_mpjpe()},
                                 {"median_pa_mpjpe", s.median_pa_mpjpe()},
                                 {"standard_error", standard_error(s.mpjpe)},
                                 {"parameters", s.parameters},
                                 {"head_parameters", s.head_parameters},
                                 {"cells", s.cells}});
    }
    for (const auto& f : r.refused) j["refused"].push_back({{"variant", f.name}, {"cells", f.cells}, {"reason", f.reason}});
    for (const auto& t : r.trends)
        j["trends"].push_back({{"better", t.better}, {"worse", t.worse}, {"gap", t.gap}, {"standard_error", t.standard_error},
                               {"verdict", t.describe()}, {"passed", t.passed()}});
    double wall = 0.0;
    for (const auto& row : r.rows) wall = std::max(wall, row.wall_seconds);
    j["longest_run_seconds"] = wall;
    j["extra"] = r.extra;
    std::ofstream(dir / (stem + ".json")) << j.dump(2) << "\n";

    std::ofstream md(dir / (stem + ".md"));
    md << "## " << to_string(r.kind) << " (" << r.experiment << ")\n\n" << format_table(r.summaries);
    md << "\nnoise floor: MPJPE " << fixed(r.noise_floor.mpjpe, 3) << " mm, PA-MPJPE " << fixed(r.noise_floor.pa_mpjpe, 3) << " mm\n";
    for (const auto& f : r.refused) md << "\nrefused " << f.name << " (" << f.cells << " cells): " << f.reason << "\n";
    for (const auto& t : r.trends) md << "\n" << t.describe() << "\n";
}

}  // namespace lixelkit::exp
