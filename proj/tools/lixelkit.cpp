#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "lixelkit/diffcore/ops.hpp"
#include "lixelkit/experiments/ablations.hpp"
#include "lixelkit/experiments/gradcheck_suite.hpp"
#include "lixelkit/heatmap/dump.hpp"
#include "lixelkit/meshgeom/mesh.hpp"

using namespace lixelkit;
using namespace lixelkit::exp;
namespace fs = std::filesystem;

namespace {

ExperimentConfig load_with_overrides(const fs::path& path, const std::vector<std::string>& overrides) {
    auto cfg = path.empty() ? ExperimentConfig{} : load_config(path);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw Error("--set expects key=value, got '" + kv + "'");
        set_option(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

std::string run_name(const ExperimentConfig& cfg, std::uint64_t seed) { return cfg.id + "_seed" + std::to_string(seed); }

void print_row(const ResultRow& r) {
    std::printf("step %6zu  loss %10.4f  MPJPE %8.2f mm  PA-MPJPE %8.2f mm  (%.1f s)\n", r.step, r.loss_total, r.eval.mpjpe,
                r.eval.pa_mpjpe, r.wall_seconds);
    std::fflush(stdout);
}

void write_mesh(const fs::path& path, const ToyTemplate& tmpl, const std::vector<mesh::Vec3>& vertices) {
    mesh::TriMesh m{vertices, tmpl.rest.faces};
    mesh::write_obj(path, m);
}

int cmd_train(const fs::path& config, std::uint64_t seed, const std::vector<std::string>& overrides, const fs::path& resume,
              std::size_t stop_after) {
    const auto cfg = load_with_overrides(config, overrides);
    const auto tmpl = make_toy_template(cfg.shape);
    const auto data = make_datasets(cfg, tmpl);
    const auto floor = measure_noise_floor(data.eval, tmpl, cfg.net.sigma);
    std::printf("%s seed %llu: %zu train / %zu eval samples, noise floor MPJPE %.3f mm\n", cfg.id.c_str(),
                static_cast<unsigned long long>(seed), data.train.size(), data.eval.size(), floor.mpjpe);
    const auto name = run_name(cfg, seed);
    RunOptions opts;
    opts.resume_from = resume;
    opts.stop_after = stop_after;
    opts.checkpoint_out = cfg.output_dir / (name + ".ckpt");
    opts.on_row = print_row;
    const auto rows = run_training(cfg, seed, tmpl, data, opts);
    write_csv(cfg.output_dir / (name + ".csv"), rows);

    nlohmann::json summary;
    summary["experiment"] = cfg.id;
    summary["seed"] = seed;
    summary["config"] = to_text(cfg);
    summary["noise_floor"] = to_json(floor);
    for (const auto& r : rows) summary["rows"].push_back(to_json(r));
    if (!rows.empty()) summary["final"] = to_json(rows.back());
    std::ofstream(cfg.output_dir / (name + ".json")) << summary.dump(2) << "\n";

    Trainer trainer(cfg, seed, tmpl);
    trainer.load(opts.checkpoint_out);
    write_mesh(cfg.output_dir / (name + "_eval0_pred.obj"), tmpl, trainer.predict_mesh(data.eval, 0));
    write_mesh(cfg.output_dir / (name + "_eval0_gt.obj"), tmpl, data.eval.samples[0].mesh_mm);
    std::printf("wrote %s.{csv,json,ckpt} to %s\n", name.c_str(), cfg.output_dir.string().c_str());
    return 0;
}

int cmd_dataset(const fs::path& config, const std::vector<std::string>& overrides, const std::string& split,
                const fs::path& out) {
    const auto cfg = load_with_overrides(config, overrides);
    const auto tmpl = make_toy_template(cfg.shape);
    const auto data = make_datasets(cfg, tmpl);
    if (split != "train" && split != "eval") throw Error("--split must be train or eval");
    save_dataset(out, split == "train" ? data.train : data.eval);
    std::printf("wrote %zu samples to %s\n", (split == "train" ? data.train : data.eval).size(), out.string().c_str());
    return 0;
}

int cmd_eval(const fs::path& checkpoint, const fs::path& data_path, const fs::path& obj) {
    const auto info = read_checkpoint_info(checkpoint);
    const auto tmpl = make_toy_template(info.cfg.shape);
    const auto data = load_dataset(data_path);
    const auto expected = info.cfg.dataset_options(1, 0);
    if (data.options.layout.width != expected.layout.width || data.options.layout.depth != expected.layout.depth ||
        data.options.input_width != expected.input_width)
        throw Error("dataset geometry does not match the checkpoint's network");
    Trainer trainer(info.cfg, info.seed, tmpl, info.variant);
    trainer.load(checkpoint);
    const auto r = trainer.evaluate(data);
    nlohmann::json j = to_json(r);
    j["checkpoint"] = checkpoint.string();
    j["step"] = info.step;
    j["noise_floor"] = to_json(measure_noise_floor(data, tmpl, info.cfg.net.sigma));
    std::cout << j.dump(2) << "\n";
    if (!obj.empty()) write_mesh(obj, tmpl, trainer.predict_mesh(data, 0));
    return 0;
}

int cmd_memtable(std::uint64_t v, std::uint64_t d) {
    const auto rows = memory_table(v, d);
    std::printf("| layout | V | D | cells | MiB (f32) | / lixel |\n|---|---|---|---|---|---|\n");
    for (const auto& r : rows) {
        std::printf("| %s | %llu | %llu | %llu | %.2f | %.2f |\n", heatmap::to_string(r.layout).c_str(),
                    static_cast<unsigned long long>(r.vertices), static_cast<unsigned long long>(r.resolution),
                    static_cast<unsigned long long>(r.cells), r.cells * 4.0 / (1024.0 * 1024.0),
                    static_cast<double>(r.cells) / static_cast<double>(rows[0].cells));
    }
    return 0;
}

int cmd_gradcheck(std::size_t seeds, double tolerance, bool verbose) {
    const auto report = run_gradcheck_suite(seeds, [&](const GradCheckCase& c) {
        if (verbose || c.max_error >= tolerance)
            std::printf("%-40s seed %llu  %.3e%s\n", c.name.c_str(), static_cast<unsigned long long>(c.seed), c.max_error,
                        c.max_error >= tolerance ? "  FAIL" : "");
    });
    for (const auto& c : report.per_name())
        if (!verbose) std::printf("%-40s max %.3e\n", c.name.c_str(), c.max_error);
    std::printf("%zu checks, worst relative error %.3e (tolerance %.0e): %s\n", report.cases.size(), report.worst(), tolerance,
                report.passed(tolerance) ? "PASS" : "FAIL");
    return report.passed(tolerance) ? 0 : 1;
}

int cmd_ablate(const std::string& kind, const fs::path& config, const std::vector<std::string>& overrides,
               const std::vector<std::string>& only) {
    const auto cfg = load_with_overrides(config, overrides);
    AblationOptions opts;
    opts.only = only;
    opts.progress = [](const std::string& s) {
        std::printf("%s\n", s.c_str());
        std::fflush(stdout);
    };
    const auto report = run_ablation(parse_ablation(kind), cfg, opts);
    write_report(report, cfg.output_dir);
    std::printf("\n%s", format_table(report.summaries).c_str());
    std::printf("noise floor: MPJPE %.3f mm\n", report.noise_floor.mpjpe);
    for (const auto& t : report.trends) std::printf("%s\n", t.describe().c_str());
    if (!report.extra.empty()) std::printf("%s\n", report.extra.dump(2).c_str());
    std::printf("wrote %s_%s.{csv,json,md} to %s\n", cfg.id.c_str(), kind.c_str(), cfg.output_dir.string().c_str());
    return 0;
}

int cmd_render(const fs::path& coords_path, const fs::path& out, const fs::path& png_prefix) {
    std::ifstream in(coords_path);
    if (!in) throw Error("cannot open " + coords_path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(coords_path.string() + ": " + e.what());
    }
    const auto& size = j.at("size");
    const heatmap::HeatmapLayout layout{heatmap::LayoutKind::lixel_xyz, size.at(0).get<std::size_t>(),
                                        size.at(1).get<std::size_t>(), size.at(2).get<std::size_t>()};
    layout.validate();
    const double sigma = j.value("sigma", heatmap::kDefaultSigma);
    std::vector<mesh::Vec3> pts;
    for (const auto& c : j.at("coords")) pts.push_back({c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()});
    if (pts.empty()) throw Error("no coordinates to render");
    const auto coords = mesh::from_points(pts);
    std::vector<heatmap::HeatmapDump> dumps;
    const std::size_t len[3] = {layout.width, layout.height, layout.depth};
    const char* axis[3] = {"x", "y", "z"};
    std::vector<Tensor> rows;
    for (int c = 0; c < 3; ++c) {
        const auto centers = diff::reshape(diff::narrow(coords, 1, c, 1), {pts.size()});
        rows.push_back(heatmap::normalize_rows(heatmap::render_gaussian_1d(centers, len[c], sigma)));
        dumps.push_back({std::string("lixel_") + axis[c], heatmap::to_string(layout.kind), sigma, rows.back().shape(),
                         rows.back().to_vector()});
    }
    heatmap::write_heatmap_dumps(out, dumps);
    const auto decoded = heatmap::decode({rows[0], rows[1], rows[2]});
    std::printf("rendered %zu landmarks to %s\n", pts.size(), out.string().c_str());
    for (std::size_t i = 0; i < pts.size(); ++i)
        std::printf("  %zu: (%.3f, %.3f, %.3f) -> decoded (%.3f, %.3f, %.3f)\n", i, pts[i][0], pts[i][1], pts[i][2],
                    decoded.xyz[i * 3], decoded.xyz[i * 3 + 1], decoded.xyz[i * 3 + 2]);
    if (!png_prefix.empty()) {
        // x/y slice through each landmark's depth: the outer product of its x and y rows.
        for (std::size_t i = 0; i < pts.size(); ++i) {
            std::vector<double> img(layout.width * layout.height);
            for (std::size_t y = 0; y < layout.height; ++y)
                for (std::size_t x = 0; x < layout.width; ++x)
                    img[y * layout.width + x] = rows[1][i * layout.height + y] * rows[0][i * layout.width + x];
            const auto path = png_prefix.string() + "_" + std::to_string(i) + ".png";
            heatmap::write_png_gray(path, layout.width, layout.height, img);
        }
        std::printf("wrote %zu PNG slices with prefix %s\n", pts.size(), png_prefix.string().c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lixelkit: 1-D heatmap mesh regression toolkit"};
    app.require_subcommand(1);

    fs::path config, resume, checkpoint, data, out, obj, coords, png;
    std::uint64_t seed = 1;
    std::vector<std::string> overrides, only;
    std::size_t stop_after = 0;

    auto* train = app.add_subcommand("train", "train one model and write CSV/JSON/checkpoint/OBJ");
    train->add_option("--config", config, "config file")->required()->check(CLI::ExistingFile);
    train->add_option("--seed", seed, "training seed (init and batch order)")->required();
    train->add_option("--set", overrides, "override a config key: key=value");
    train->add_option("--resume", resume, "continue from a checkpoint")->check(CLI::ExistingFile);
    train->add_option("--stop-after", stop_after, "stop after this many total steps");

    auto* dataset = app.add_subcommand("dataset", "write the train or eval split of a config to a file");
    std::string split = "eval";
    dataset->add_option("--config", config, "config file")->required()->check(CLI::ExistingFile);
    dataset->add_option("--split", split, "train or eval");
    dataset->add_option("--set", overrides, "override a config key: key=value");
    dataset->add_option("--out", out, "output file")->required();

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset file");
    eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
    eval->add_option("--data", data, "dataset file")->required()->check(CLI::ExistingFile);
    eval->add_option("--obj", obj, "write the first predicted mesh as OBJ");

    auto* memtable = app.add_subcommand("memtable", "heatmap cell counts per layout");
    std::uint64_t v = 6980, d = 64;
    memtable->add_option("--V", v, "vertex count")->required();
    memtable->add_option("--D", d, "resolution per axis")->required();

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite; nonzero exit on failure");
    std::size_t gc_seeds = 10;
    double tolerance = 1e-4;
    bool verbose = false;
    gradcheck->add_option("--seeds", gc_seeds, "random draws per check");
    gradcheck->add_option("--tolerance", tolerance, "maximum relative error");
    gradcheck->add_flag("--verbose", verbose, "print every check");

    auto* ablate = app.add_subcommand("ablate", "run one ablation study");
    std::string kind;
    ablate->add_option("kind", kind, "representation | layout | cascade | marginalization")
        ->required()
        ->check(CLI::IsMember({"representation", "layout", "cascade", "marginalization"}));
    ablate->add_option("--config", config, "config file")->required()->check(CLI::ExistingFile);
    ablate->add_option("--set", overrides, "override a config key: key=value");
    ablate->add_option("--only", only, "run only these variants")->delimiter(',');

    auto* render = app.add_subcommand("render", "render landmark coordinates to lixel heatmaps");
    render->add_option("--coords", coords, "JSON: {\"size\": [W, H, D], \"sigma\": s, \"coords\": [[x, y, z], ...]}")
        ->required()
        ->check(CLI::ExistingFile);
    render->add_option("--out", out, "heatmap dump file")->required();
    render->add_option("--png", png, "write one x/y PNG slice per landmark with this path prefix");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*train) return cmd_train(config, seed, overrides, resume, stop_after);
        if (*dataset) return cmd_dataset(config, overrides, split, out);
        if (*eval) return cmd_eval(checkpoint, data, obj);
        if (*memtable) return cmd_memtable(v, d);
        if (*gradcheck) return cmd_gradcheck(gc_seeds, tolerance, verbose);
        if (*ablate) return cmd_ablate(kind, config, overrides, only);
        if (*render) return cmd_render(coords, out, png);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
