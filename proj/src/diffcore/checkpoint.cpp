#include "lixelkit/diffcore/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace lixelkit::diff {

namespace {

constexpr std::array<char, 8> kMagic{'L', 'X', 'C', 'K', 'P', 'T', '0', '1'};

template <class T>
void put_le(std::ostream& os, T v) {
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    os.write(bytes.data(), sizeof(T));
}

template <class T>
T get_le(const char* p) {
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T v;
    std::memcpy(&v, bytes.data(), sizeof(T));
    return v;
}

}  // namespace

const NamedArray* Checkpoint::find(const std::string& name) const {
    auto it = std::find_if(arrays.begin(), arrays.end(), [&](const NamedArray& a) { return a.name == name; });
    return it == arrays.end() ? nullptr : &*it;
}

const NamedArray& Checkpoint::at(const std::string& name) const {
    const auto* a = find(name);
    if (!a) throw Error("checkpoint: no array named '" + name + "'");
    return *a;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    nlohmann::json manifest;
    manifest["format"] = "lixelkit-checkpoint";
    manifest["version"] = 1;
    manifest["meta"] = ckpt.meta;
    auto& arrays = manifest["arrays"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& a : ckpt.arrays) {
        if (numel(a.shape) != a.values.size()) throw ShapeError("checkpoint: array '" + a.name + "' shape mismatch");
        arrays.push_back({{"name", a.name}, {"shape", a.shape}, {"offset", offset}, {"count", a.values.size()}});
        offset += a.values.size() * sizeof(double);
    }
    const std::string text = manifest.dump();
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("checkpoint: cannot open '" + path.string() + "' for writing");
    os.write(kMagic.data(), kMagic.size());
    put_le<std::uint64_t>(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& a : ckpt.arrays)
        for (double v : a.values) put_le<double>(os, v);
    if (!os) throw Error("checkpoint: write failed for '" + path.string() + "'");
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("checkpoint: cannot open '" + path.string() + "'");
    std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (bytes.size() < 16 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
        throw Error("checkpoint: '" + path.string() + "' is not a lixelkit checkpoint");
    }
    const auto mlen = get_le<std::uint64_t>(bytes.data() + 8);
    if (16 + mlen > bytes.size()) throw Error("checkpoint: truncated manifest");
    const auto manifest = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(mlen));
    if (manifest.value("format", "") != "lixelkit-checkpoint" || manifest.value("version", 0) != 1) {
        throw Error("checkpoint: unsupported manifest format/version");
    }
    const char* payload = bytes.data() + 16 + mlen;
    const std::size_t payload_size = bytes.size() - 16 - mlen;
    Checkpoint ckpt;
    ckpt.meta = manifest.value("meta", nlohmann::json::object());
    for (const auto& entry : manifest.at("arrays")) {
        NamedArray a;
        a.name = entry.at("name").get<std::string>();
        a.shape = entry.at("shape").get<Shape>();
        const auto off = entry.at("offset").get<std::uint64_t>();
        const auto count = entry.at("count").get<std::uint64_t>();
        if (count != numel(a.shape) || off + count * sizeof(double) > payload_size) {
            throw Error("checkpoint: array '" + a.name + "' out of bounds");
        }
        a.values.resize(count);
        for (std::size_t i = 0; i < count; ++i) a.values[i] = get_le<double>(payload + off + i * sizeof(double));
        ckpt.arrays.push_back(std::move(a));
    }
    return ckpt;
}

}  // namespace lixelkit::diff
