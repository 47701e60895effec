#include "rfmesh/mesh_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rfmesh/errors.hpp"

namespace rfmesh {

void save_obj(const std::string& path, const TexturedMesh& tm) {
    const TriMesh& mesh = tm.mesh;
    if (tm.has_uvs() && tm.face_uvs.size() != mesh.faces.size())
        throw InputError("face_uvs must parallel faces");

    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw RuntimeFailure("cannot open for writing: " + path);
    if (!tm.mtllib.empty()) std::fprintf(f, "mtllib %s\n", tm.mtllib.c_str());
    if (!tm.material.empty()) std::fprintf(f, "usemtl %s\n", tm.material.c_str());
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        Vec3 p = mesh.position(static_cast<int>(i));
        std::fprintf(f, "v %.17g %.17g %.17g\n", p.x, p.y, p.z);
    }
    for (const Vec2& uv : tm.uvs) std::fprintf(f, "vt %.17g %.17g\n", uv.x, uv.y);
    if (tm.has_uvs()) {
        for (size_t i = 0; i < mesh.faces.size(); ++i) {
            const auto& tri = mesh.faces[i];
            const auto& uvt = tm.face_uvs[i];
            std::fprintf(f, "f %d/%d %d/%d %d/%d\n", tri[0] + 1, uvt[0] + 1, tri[1] + 1,
                         uvt[1] + 1, tri[2] + 1, uvt[2] + 1);
        }
    } else {
        for (const auto& tri : mesh.faces)
            std::fprintf(f, "f %d %d %d\n", tri[0] + 1, tri[1] + 1, tri[2] + 1);
    }
    if (std::fclose(f) != 0) throw RuntimeFailure("write failed: " + path);
}

namespace {

// One face corner: vertex index plus optional uv index (0-based, -1 = none).
struct CornerRef {
    int v = -1;
    int vt = -1;
};

CornerRef parse_corner(const std::string& token, size_t nv, size_t nvt, const std::string& path) {
    CornerRef ref;
    size_t s1 = token.find('/');
    auto parse_index = [&](const std::string& text, size_t limit, const char* what) {
        char* end = nullptr;
        long idx = std::strtol(text.c_str(), &end, 10);
        if (end == text.c_str() || *end != '\0')
            throw InputError("malformed " + std::string(what) + " reference in " + path);
        if (idx < 0) throw InputError("negative OBJ indices not supported: " + path);
        if (idx == 0 || static_cast<size_t>(idx) > limit)
            throw InputError("out-of-range " + std::string(what) + " reference in " + path);
        return static_cast<int>(idx - 1);
    };
    if (s1 == std::string::npos) {
        ref.v = parse_index(token, nv, "vertex");
        return ref;
    }
    ref.v = parse_index(token.substr(0, s1), nv, "vertex");
    size_t s2 = token.find('/', s1 + 1);
    std::string uv_part =
        s2 == std::string::npos ? token.substr(s1 + 1) : token.substr(s1 + 1, s2 - s1 - 1);
    if (!uv_part.empty()) ref.vt = parse_index(uv_part, nvt, "uv");
    // A trailing normal index is validated syntactically but dropped.
    if (s2 != std::string::npos) {
        std::string n_part = token.substr(s2 + 1);
        if (!n_part.empty()) {
            char* end = nullptr;
            std::strtol(n_part.c_str(), &end, 10);
            if (end == n_part.c_str() || *end != '\0')
                throw InputError("malformed normal reference in " + path);
        }
    }
    return ref;
}

}  // namespace

TexturedMesh load_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open OBJ: " + path);
    TexturedMesh tm;
    bool any_corner_uv = false;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag) || tag[0] == '#') continue;
        if (tag == "v") {
            Vec3 p;
            if (!(ss >> p.x >> p.y >> p.z)) throw InputError("malformed vertex line in " + path);
            tm.mesh.vertices.push_back(p);
        } else if (tag == "vt") {
            Vec2 uv;
            if (!(ss >> uv.x >> uv.y)) throw InputError("malformed uv line in " + path);
            tm.uvs.push_back(uv);
        } else if (tag == "f") {
            std::vector<CornerRef> poly;
            std::string token;
            while (ss >> token)
                poly.push_back(parse_corner(token, tm.mesh.vertices.size(), tm.uvs.size(), path));
            if (poly.size() < 3) throw InputError("face with fewer than 3 corners in " + path);
            for (size_t k = 2; k < poly.size(); ++k) {
                tm.mesh.faces.push_back({poly[0].v, poly[k - 1].v, poly[k].v});
                tm.face_uvs.push_back({poly[0].vt, poly[k - 1].vt, poly[k].vt});
                if (poly[0].vt >= 0 || poly[k - 1].vt >= 0 || poly[k].vt >= 0)
                    any_corner_uv = true;
            }
        } else if (tag == "mtllib") {
            ss >> tm.mtllib;
        } else if (tag == "usemtl") {
            ss >> tm.material;
        }
        // vn / o / g / s and anything else: ignored.
    }
    if (!any_corner_uv) {
        tm.face_uvs.clear();
    } else {
        for (const auto& uvt : tm.face_uvs)
            for (int c = 0; c < 3; ++c)
                if (uvt[c] < 0)
                    throw InputError("mixed textured and untextured face corners in " + path);
    }
    return tm;
}

void save_mtl(const std::string& path, const std::string& material,
              const std::string& diffuse_texture) {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw RuntimeFailure("cannot open for writing: " + path);
    std::fprintf(f, "newmtl %s\n", material.c_str());
    std::fprintf(f, "Ka 1 1 1\nKd 1 1 1\nKs 0 0 0\nd 1\nillum 1\n");
    if (!diffuse_texture.empty()) std::fprintf(f, "map_Kd %s\n", diffuse_texture.c_str());
    if (std::fclose(f) != 0) throw RuntimeFailure("write failed: " + path);
}

}  // namespace rfmesh
