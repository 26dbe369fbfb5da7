#include <fstream>
#include <iomanip>
#include <sstream>

#include "lixelkit/meshgeom/mesh.hpp"

namespace lixelkit::mesh {

TriMesh read_obj(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error("read_obj: cannot open " + path.string());
    TriMesh mesh;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag) || tag[0] == '#') continue;
        if (tag == "v") {
            Vec3 p{};
            if (!(ss >> p[0] >> p[1] >> p[2])) throw Error("read_obj: bad vertex on line " + std::to_string(lineno));
            mesh.vertices.push_back(p);
        } else if (tag == "f") {
            std::vector<long> idx;
            std::string tok;
            while (ss >> tok) idx.push_back(std::stol(tok.substr(0, tok.find('/'))));
            if (idx.size() != 3) throw Error("read_obj: only triangles are supported (line " + std::to_string(lineno) + ")");
            Face f{};
            for (int k = 0; k < 3; ++k) {
                if (idx[k] < 1) throw Error("read_obj: bad face index on line " + std::to_string(lineno));
                f[k] = static_cast<std::uint32_t>(idx[k] - 1);
            }
            mesh.faces.push_back(f);
        }
    }
    mesh.validate();
    return mesh;
}

void write_obj(const std::filesystem::path& path, const TriMesh& mesh) {
    std::ofstream os(path);
    if (!os) throw Error("write_obj: cannot open " + path.string());
    os << std::setprecision(17);
    for (const auto& v : mesh.vertices) os << "v " << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
    for (const auto& f : mesh.faces) os << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    if (!os) throw Error("write_obj: write failed for " + path.string());
}

}  // namespace lixelkit::mesh
