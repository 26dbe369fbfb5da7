#include "lixelkit/experiments/config_file.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace lixelkit::exp {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

template <typename T>
T parse_number(const std::string& v) {
    T out{};
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) throw Error("expected a number, got '" + v + "'");
    return out;
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw Error("expected true or false, got '" + v + "'");
}

std::string fmt(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

template <typename T>
std::string join(const std::vector<T>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
    return s;
}

struct Field {
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Field size_field(T ExperimentConfig::*m) {
    return {[m](ExperimentConfig& c, const std::string& v) { c.*m = parse_number<T>(v); },
            [m](const ExperimentConfig& c) { return std::to_string(c.*m); }};
}

Field real_field(double ExperimentConfig::*m) {
    return {[m](ExperimentConfig& c, const std::string& v) { c.*m = parse_number<double>(v); },
            [m](const ExperimentConfig& c) { return fmt(c.*m); }};
}

template <typename T>
Field net_size(T net::NetConfig::*m) {
    return {[m](ExperimentConfig& c, const std::string& v) { c.net.*m = parse_number<T>(v); },
            [m](const ExperimentConfig& c) { return std::to_string(c.net.*m); }};
}

Field loss_flag(bool mesh::LossWeights::*m) {
    return {[m](ExperimentConfig& c, const std::string& v) { c.loss.*m = parse_bool(v); },
            [m](const ExperimentConfig& c) { return std::string(c.loss.*m ? "true" : "false"); }};
}

Field data_real(double DatasetOptions::*m) {
    return {[m](ExperimentConfig& c, const std::string& v) { c.data.*m = parse_number<double>(v); },
            [m](const ExperimentConfig& c) { return fmt(c.data.*m); }};
}

const std::map<std::string, Field>& fields() {
    static const std::map<std::string, Field> table = [] {
        std::map<std::string, Field> f;
        f["id"] = {[](ExperimentConfig& c, const std::string& v) { c.id = v; },
                   [](const ExperimentConfig& c) { return c.id; }};
        f["output_dir"] = {[](ExperimentConfig& c, const std::string& v) { c.output_dir = v; },
                           [](const ExperimentConfig& c) { return c.output_dir.string(); }};
        f["seeds"] = {[](ExperimentConfig& c, const std::string& v) {
                          c.seeds.clear();
                          for (const auto& s : split(v, ',')) c.seeds.push_back(parse_number<std::uint64_t>(s));
                      },
                      [](const ExperimentConfig& c) { return join(c.seeds); }};
        f["train_samples"] = size_field(&ExperimentConfig::train_samples);
        f["eval_samples"] = size_field(&ExperimentConfig::eval_samples);
        f["data_seed"] = size_field(&ExperimentConfig::data_seed);
        f["steps"] = size_field(&ExperimentConfig::steps);
        f["batch_size"] = size_field(&ExperimentConfig::batch_size);
        f["eval_every"] = size_field(&ExperimentConfig::eval_every);
        f["learning_rate"] = real_field(&ExperimentConfig::learning_rate);
        f["lr_decay_step"] = size_field(&ExperimentConfig::lr_decay_step);
        f["lr_decay_factor"] = real_field(&ExperimentConfig::lr_decay_factor);
        f["beta1"] = real_field(&ExperimentConfig::beta1);
        f["beta2"] = real_field(&ExperimentConfig::beta2);

        f["net.depth"] = net_size(&net::NetConfig::depth);
        f["net.deep_size"] = {[](ExperimentConfig& c, const std::string& v) {
                                  c.net.deep_h = c.net.deep_w = parse_number<std::size_t>(v);
                              },
                              [](const ExperimentConfig& c) { return std::to_string(c.net.deep_h); }};
        f["net.stem_channels"] = net_size(&net::NetConfig::stem_channels);
        f["net.head_channels"] = net_size(&net::NetConfig::head_channels);
        f["net.fuse_channels"] = net_size(&net::NetConfig::fuse_channels);
        f["net.fc_hidden"] = net_size(&net::NetConfig::fc_hidden);
        f["net.cell_budget"] = net_size(&net::NetConfig::cell_budget);
        f["net.trunk_channels"] = {[](ExperimentConfig& c, const std::string& v) {
                                       c.net.trunk_channels.clear();
                                       for (const auto& s : split(v, ','))
                                           c.net.trunk_channels.push_back(parse_number<std::size_t>(s));
                                   },
                                   [](const ExperimentConfig& c) { return join(c.net.trunk_channels); }};
        f["net.sigma"] = {[](ExperimentConfig& c, const std::string& v) { c.net.sigma = parse_number<double>(v); },
                          [](const ExperimentConfig& c) { return fmt(c.net.sigma); }};
        f["net.marginalize_method"] = {
            [](ExperimentConfig& c, const std::string& v) { c.net.marginalize_method = heatmap::parse_marginal_method(v); },
            [](const ExperimentConfig& c) { return heatmap::to_string(c.net.marginalize_method); }};
        f["net.marginalize_stage"] = {
            [](ExperimentConfig& c, const std::string& v) { c.net.marginalize_stage = net::parse_marginal_stage(v); },
            [](const ExperimentConfig& c) { return net::to_string(c.net.marginalize_stage); }};
        f["net.cascade"] = {[](ExperimentConfig& c, const std::string& v) { c.net.cascade = net::parse_cascade(v); },
                            [](const ExperimentConfig& c) { return net::to_string(c.net.cascade); }};
        f["net.representation"] = {
            [](ExperimentConfig& c, const std::string& v) { c.net.representation = net::parse_representation(v); },
            [](const ExperimentConfig& c) { return net::to_string(c.net.representation); }};
        f["net.layout"] = {[](ExperimentConfig& c, const std::string& v) { c.net.layout = heatmap::parse_layout_kind(v); },
                           [](const ExperimentConfig& c) { return heatmap::to_string(c.net.layout); }};
        f["net.init"] = {[](ExperimentConfig& c, const std::string& v) { c.net.init = net::parse_init(v); },
                         [](const ExperimentConfig& c) { return net::to_string(c.net.init); }};

        f["loss.lambda_normal"] = {
            [](ExperimentConfig& c, const std::string& v) { c.loss.lambda_normal = parse_number<double>(v); },
            [](const ExperimentConfig& c) { return fmt(c.loss.lambda_normal); }};
        f["loss.pose_posenet"] = loss_flag(&mesh::LossWeights::pose_posenet);
        f["loss.pose_meshnet"] = loss_flag(&mesh::LossWeights::pose_meshnet);
        f["loss.vertex"] = loss_flag(&mesh::LossWeights::vertex);
        f["loss.normal"] = loss_flag(&mesh::LossWeights::normal);
        f["loss.edge"] = loss_flag(&mesh::LossWeights::edge);

        f["shape.radius"] = {[](ExperimentConfig& c, const std::string& v) { c.shape.radius = parse_number<double>(v); },
                             [](const ExperimentConfig& c) { return fmt(c.shape.radius); }};
        f["shape.rings"] = {[](ExperimentConfig& c, const std::string& v) { c.shape.rings = parse_number<std::size_t>(v); },
                            [](const ExperimentConfig& c) { return std::to_string(c.shape.rings); }};
        f["shape.ring_segments"] = {
            [](ExperimentConfig& c, const std::string& v) { c.shape.ring_segments = parse_number<std::size_t>(v); },
            [](const ExperimentConfig& c) { return std::to_string(c.shape.ring_segments); }};

        f["data.depth_span"] = data_real(&DatasetOptions::depth_span);
        f["data.root_depth_min"] = data_real(&DatasetOptions::root_depth_min);
        f["data.root_depth_max"] = data_real(&DatasetOptions::root_depth_max);
        f["data.focal"] = data_real(&DatasetOptions::focal);
        f["data.image_size"] = data_real(&DatasetOptions::image_size);
        f["data.blob_sigma"] = data_real(&DatasetOptions::blob_sigma);
        f["data.noise_sd"] = data_real(&DatasetOptions::noise_sd);
        f["data.border_cells"] = data_real(&DatasetOptions::border_cells);
        return f;
    }();
    return table;
}

}  // namespace

net::NetConfig toy_network() {
    net::NetConfig n;
    n.deep_h = n.deep_w = 2;
    n.depth = 16;
    return n;
}

void ExperimentConfig::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw Error("config: " + what);
    };
    require(!id.empty(), "id must not be empty");
    require(!seeds.empty(), "seeds must list at least one seed");
    require(train_samples >= 1, "train_samples must be >= 1");
    require(eval_samples >= 1, "eval_samples must be >= 1");
    require(batch_size >= 1 && batch_size <= train_samples, "batch_size must lie in [1, train_samples]");
    require(eval_every >= 1, "eval_every must be >= 1");
    require(learning_rate >= 0.0, "learning_rate must be >= 0");
    require(lr_decay_factor >= 0.0, "lr_decay_factor must be >= 0");
    require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "beta1 and beta2 must lie in [0, 1)");
    require(shape.rings >= 2 && shape.ring_segments >= 3 && shape.radius > 0.0, "shape needs rings >= 2, ring_segments >= 3, radius > 0");
    require(data.depth_span > 0.0 && data.focal > 0.0 && data.image_size > 0.0, "data.depth_span, data.focal and data.image_size must be positive");
    require(data.root_depth_min > data.depth_span / 2 && data.root_depth_max >= data.root_depth_min,
            "data.root_depth_min must exceed half the depth span and not exceed data.root_depth_max");
    require(data.blob_sigma > 0.0 && data.noise_sd >= 0.0, "data.blob_sigma must be positive and data.noise_sd non-negative");
    loss.validate();
    network(make_toy_template(shape)).validate();
}

net::NetConfig ExperimentConfig::network(const ToyTemplate& tmpl) const {
    net::NetConfig n = net;
    n.joints = tmpl.joints();
    n.vertices = tmpl.vertices();
    n.in_channels = tmpl.joints();
    return n;
}

DatasetOptions ExperimentConfig::dataset_options(std::size_t count, std::uint64_t seed) const {
    DatasetOptions o = data;
    o.count = count;
    o.seed = seed;
    o.input_width = net.input_w();
    o.input_height = net.input_h();
    o.layout = net.mesh_layout();
    o.layout.kind = heatmap::LayoutKind::lixel_xyz;
    return o;
}

void set_option(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    const auto it = fields().find(key);
    if (it == fields().end()) throw Error("unknown key '" + key + "'");
    it->second.set(cfg, value);
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t n = 0;
    std::map<std::string, std::size_t> seen;
    while (std::getline(in, line)) {
        ++n;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto where = source + ":" + std::to_string(n) + ": ";
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error(where + "expected 'key = value'");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (const auto prev = seen.find(key); prev != seen.end())
            throw Error(where + "'" + key + "' already set on line " + std::to_string(prev->second));
        seen[key] = n;
        try {
            set_option(cfg, key, value);
        } catch (const Error& e) {
            throw Error(where + e.what());
        }
    }
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw Error(source + ": " + e.what());
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::string to_text(const ExperimentConfig& cfg) {
    std::string out;
    for (const auto& [key, field] : fields()) out += key + " = " + field.get(cfg) + "\n";
    return out;
}

}  // namespace lixelkit::exp
