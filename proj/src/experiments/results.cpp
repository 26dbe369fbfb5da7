#include "lixelkit/experiments/results.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace lixelkit::exp {

namespace {

constexpr const char* kColumns =
    "experiment,variant,seed,step,loss_total,loss_pose_posenet,loss_pose_meshnet,loss_vertex,loss_normal,loss_edge,"
    "mpjpe,pa_mpjpe,vertex_error,eval_samples,parameters,head_parameters,cells";

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string fixed(double v, int digits) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

std::string csv_header() { return std::string(kCsvSchema) + "\n" + kColumns + "\n"; }

std::string csv_row(const ResultRow& r) {
    std::string s = r.experiment + "," + r.variant + "," + std::to_string(r.seed) + "," + std::to_string(r.step);
    for (double v : {r.loss_total, r.loss_pose_posenet, r.loss_pose_meshnet, r.loss_vertex, r.loss_normal, r.loss_edge,
                     r.eval.mpjpe, r.eval.pa_mpjpe, r.eval.vertex_error})
        s += "," + num(v);
    s += "," + std::to_string(r.eval.samples) + "," + std::to_string(r.parameters) + "," +
         std::to_string(r.head_parameters) + "," + std::to_string(r.cells) + "\n";
    return s;
}

void write_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << csv_header();
    for (const auto& r : rows) out << csv_row(r);
}

std::vector<ResultRow> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kCsvSchema) throw Error(path.string() + ": missing or unknown schema line");
    if (!std::getline(in, line) || line != kColumns) throw Error(path.string() + ": unexpected columns");
    std::vector<ResultRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string item;
        while (std::getline(ss, item, ',')) f.push_back(item);
        if (f.size() != 17) throw Error(path.string() + ": malformed row '" + line + "'");
        ResultRow r;
        r.experiment = f[0];
        r.variant = f[1];
        r.seed = std::stoull(f[2]);
        r.step = std::stoull(f[3]);
        double* dst[] = {&r.loss_total, &r.loss_pose_posenet, &r.loss_pose_meshnet, &r.loss_vertex, &r.loss_normal,
                         &r.loss_edge, &r.eval.mpjpe, &r.eval.pa_mpjpe, &r.eval.vertex_error};
        for (int i = 0; i < 9; ++i) *dst[i] = std::stod(f[4 + i]);
        r.eval.samples = std::stoull(f[13]);
        r.parameters = std::stoull(f[14]);
        r.head_parameters = std::stoull(f[15]);
        r.cells = std::stoull(f[16]);
        rows.push_back(r);
    }
    return rows;
}

nlohmann::json to_json(const EvalResult& r) {
    return {{"mpjpe", r.mpjpe}, {"pa_mpjpe", r.pa_mpjpe}, {"vertex_error", r.vertex_error}, {"samples", r.samples}};
}

nlohmann::json to_json(const ResultRow& r) {
    return {{"experiment", r.experiment},
            {"variant", r.variant},
            {"seed", r.seed},
            {"step", r.step},
            {"loss",
             {{"total", r.loss_total},
              {"pose_posenet", r.loss_pose_posenet},
              {"pose_meshnet", r.loss_pose_meshnet},
              {"vertex", r.loss_vertex},
              {"normal", r.loss_normal},
              {"edge", r.loss_edge}}},
            {"eval", to_json(r.eval)},
            {"parameters", r.parameters},
            {"head_parameters", r.head_parameters},
            {"cells", r.cells},
            {"wall_seconds", r.wall_seconds}};
}

double median(std::vector<double> v) {
    if (v.empty()) throw Error("median of an empty set");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
    if (v.empty()) throw Error("mean of an empty set");
    return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double standard_error(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / (v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
}

std::vector<VariantSummary> summarize(const std::vector<ResultRow>& rows) {
    std::vector<VariantSummary> out;
    std::map<std::pair<std::string, std::uint64_t>, const ResultRow*> last;
    for (const auto& r : rows) {
        auto& slot = last[{r.variant, r.seed}];
        if (!slot || r.step >= slot->step) slot = &r;
    }
    for (const auto& r : rows) {
        auto it = std::find_if(out.begin(), out.end(), [&](const VariantSummary& s) { return s.variant == r.variant; });
        if (it == out.end()) {
            out.push_back({r.variant, {}, {}, {}, r.parameters, r.head_parameters, r.cells});
            it = out.end() - 1;
        }
        if (last[{r.variant, r.seed}] != &r) continue;
        it->seeds.push_back(r.seed);
        it->mpjpe.push_back(r.eval.mpjpe);
        it->pa_mpjpe.push_back(r.eval.pa_mpjpe);
    }
    return out;
}

std::string format_table(const std::vector<VariantSummary>& summaries) {
    std::string s = "| variant | seeds | median MPJPE | SE | median PA-MPJPE | params | head params | cells |\n";
    s += "|---|---|---|---|---|---|---|---|\n";
    for (const auto& v : summaries) {
        s += "| " + v.variant + " | " + std::to_string(v.seeds.size()) + " | " + fixed(v.median_mpjpe(), 2) + " | " +
             fixed(standard_error(v.mpjpe), 2) + " | " + fixed(v.median_pa_mpjpe(), 2) + " | " +
             std::to_string(v.parameters) + " | " + std::to_string(v.head_parameters) + " | " + std::to_string(v.cells) +
             " |\n";
    }
    return s;
}

}  // namespace lixelkit::exp
