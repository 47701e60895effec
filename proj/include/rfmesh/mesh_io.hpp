#pragma once

#include <array>
#include <string>
#include <vector>

#include "rfmesh/math.hpp"
#include "rfmesh/trimesh.hpp"

namespace rfmesh {

// Mesh plus an optional per-corner UV layer (face_uvs parallels mesh.faces,
// indexing into uvs). material/mtllib are carried through OBJ round trips.
struct TexturedMesh {
    TriMesh mesh;
    std::vector<Vec2> uvs;
    std::vector<std::array<int, 3>> face_uvs;
    std::string material;
    std::string mtllib;

    bool has_uvs() const { return !face_uvs.empty(); }
};

// Writes ASCII OBJ with full double precision (%.17g); positions survive a
// round trip bit-exactly. Faces emit v or v/vt references.
void save_obj(const std::string& path, const TexturedMesh& tm);

// Parses v/vt/f records (v, v/vt, v//vn, v/vt/vn forms; polygons are fan
// triangulated). Unknown record types are ignored. Throws InputError on
// malformed or out-of-range references.
TexturedMesh load_obj(const std::string& path);

// Minimal MTL with a diffuse texture map.
void save_mtl(const std::string& path, const std::string& material,
              const std::string& diffuse_texture);

}  // namespace rfmesh
