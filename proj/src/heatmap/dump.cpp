#include "lixelkit/heatmap/dump.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace lixelkit::heatmap {

namespace {

void put_f64le(std::ostream& os, double v) {
    std::array<char, 8> b;
    std::memcpy(b.data(), &v, 8);
    if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
    os.write(b.data(), 8);
}

double get_f64le(const char* p) {
    std::array<char, 8> b;
    std::memcpy(b.data(), p, 8);
    if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
    double v;
    std::memcpy(&v, b.data(), 8);
    return v;
}

void put_be32(std::string& out, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((v >> s) & 0xff));
}

void png_chunk(std::ostream& os, const char* type, const std::string& data) {
    std::string buf;
    put_be32(buf, static_cast<std::uint32_t>(data.size()));
    buf.append(type, 4);
    buf += data;
    const auto* bytes = reinterpret_cast<const Bytef*>(buf.data() + 4);
    const auto crc = crc32(crc32(0L, Z_NULL, 0), bytes, static_cast<uInt>(buf.size() - 4));
    put_be32(buf, static_cast<std::uint32_t>(crc));
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

}  // namespace

void write_heatmap_dumps(const std::filesystem::path& path, const std::vector<HeatmapDump>& dumps) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("heatmap dump: cannot open '" + path.string() + "'");
    for (const auto& d : dumps) {
        if (diff::numel(d.shape) != d.values.size()) throw ShapeError("heatmap dump: '" + d.name + "' shape mismatch");
        nlohmann::json h{{"format", "lixelkit-heatmap"}, {"version", 1},      {"name", d.name},
                         {"layout", d.layout},          {"sigma", d.sigma},   {"shape", d.shape},
                         {"dtype", "f64le"},            {"payload_bytes", d.values.size() * 8}};
        os << h.dump() << '\n';
        for (double v : d.values) put_f64le(os, v);
    }
    if (!os) throw Error("heatmap dump: write failed for '" + path.string() + "'");
}

std::vector<HeatmapDump> read_heatmap_dumps(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("heatmap dump: cannot open '" + path.string() + "'");
    std::vector<HeatmapDump> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto h = nlohmann::json::parse(line);
        if (h.value("format", "") != "lixelkit-heatmap") throw Error("heatmap dump: bad header");
        HeatmapDump d;
        d.name = h.at("name").get<std::string>();
        d.layout = h.at("layout").get<std::string>();
        d.sigma = h.at("sigma").get<double>();
        d.shape = h.at("shape").get<diff::Shape>();
        const auto bytes = h.at("payload_bytes").get<std::size_t>();
        std::vector<char> payload(bytes);
        is.read(payload.data(), static_cast<std::streamsize>(bytes));
        if (static_cast<std::size_t>(is.gcount()) != bytes) throw Error("heatmap dump: truncated payload");
        d.values.resize(bytes / 8);
        for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] = get_f64le(payload.data() + i * 8);
        out.push_back(std::move(d));
    }
    return out;
}

void write_png_gray(const std::filesystem::path& path, std::size_t width, std::size_t height,
                    const std::vector<double>& values) {
    if (values.size() != width * height || width == 0 || height == 0) throw ShapeError("png: size mismatch");
    double mx = 0.0;
    for (double v : values) mx = std::max(mx, v);
    std::string raw;
    raw.reserve(height * (width + 1));
    for (std::size_t y = 0; y < height; ++y) {
        raw.push_back(0);  // filter: none
        for (std::size_t x = 0; x < width; ++x) {
            const double v = mx > 0.0 ? std::clamp(values[y * width + x] / mx, 0.0, 1.0) : 0.0;
            raw.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
        }
    }
    uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
    std::string z(zlen, '\0');
    if (compress(reinterpret_cast<Bytef*>(z.data()), &zlen, reinterpret_cast<const Bytef*>(raw.data()),
                 static_cast<uLong>(raw.size())) != Z_OK) {
        throw Error("png: compression failed");
    }
    z.resize(zlen);
    std::string ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(width));
    put_be32(ihdr, static_cast<std::uint32_t>(height));
    ihdr += std::string{8, 0, 0, 0, 0};  // bit depth 8, grayscale, deflate, no filter, no interlace
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("png: cannot open '" + path.string() + "'");
    const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    os.write(reinterpret_cast<const char*>(sig), 8);
    png_chunk(os, "IHDR", ihdr);
    png_chunk(os, "IDAT", z);
    png_chunk(os, "IEND", "");
}

}  // namespace lixelkit::heatmap
