#include "rfmesh/marching_cubes.hpp"

#include <cmath>
#include <unordered_map>

#include "rfmesh/errors.hpp"
#include "rfmesh/parallel.hpp"

namespace rfmesh {

#include "mc_tables.inc"

// Corner offsets matching the table convention: 0..3 cycle the low-z face,
// 4..7 the high-z face directly above.
static const int kCorner[8][3] = {
    {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
    {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1},
};

static const int kEdgeCorner[12][2] = {
    {0, 1}, {1, 2}, {2, 3}, {3, 0},
    {4, 5}, {5, 6}, {6, 7}, {7, 4},
    {0, 4}, {1, 5}, {2, 6}, {3, 7},
};

DensityVolume make_density_volume(int res, const AABB& box) {
    if (res < 2) throw InputError("density volume resolution must be >= 2");
    DensityVolume vol;
    vol.res = res;
    vol.box = box;
    vol.values.assign(static_cast<size_t>(res) * res * res, 0.0);
    return vol;
}

DensityVolume sample_density_volume(const GeometryField& geo, int res, const AABB& box) {
    DensityVolume vol = make_density_volume(res, box);
    parallel_chunks(res, 0, [&](int, int z0, int z1) {
        for (int z = z0; z < z1; ++z)
            for (int y = 0; y < res; ++y)
                for (int x = 0; x < res; ++x) vol.at(x, y, z) = geo.density(vol.lattice_point(x, y, z));
    });
    return vol;
}

TriMesh marching_cubes(const DensityVolume& vol, double iso) {
    if (!std::isfinite(iso)) throw InputError("marching cubes threshold must be finite");
    if (vol.res < 2) throw InputError("density volume resolution must be >= 2");
    const int res = vol.res;

    TriMesh mesh;
    // One welded vertex per crossed lattice edge, keyed by its endpoint pair.
    std::unordered_map<uint64_t, int> edge_vertex;
    edge_vertex.reserve(1 << 16);

    auto lattice_id = [res](int x, int y, int z) {
        return (static_cast<int64_t>(z) * res + y) * res + x;
    };

    double corner_val[8];
    Vec3 corner_pos[8];
    int64_t corner_id[8];
    int cell_vertex[12];

    for (int z = 0; z + 1 < res; ++z) {
        for (int y = 0; y + 1 < res; ++y) {
            for (int x = 0; x + 1 < res; ++x) {
                unsigned index = 0;
                for (int c = 0; c < 8; ++c) {
                    int cx = x + kCorner[c][0], cy = y + kCorner[c][1], cz = z + kCorner[c][2];
                    corner_val[c] = vol.at(cx, cy, cz);
                    if (corner_val[c] < iso) index |= 1u << c;
                }
                unsigned edges = kEdgeTable[index];
                if (edges == 0) continue;
                for (int c = 0; c < 8; ++c) {
                    int cx = x + kCorner[c][0], cy = y + kCorner[c][1], cz = z + kCorner[c][2];
                    corner_pos[c] = vol.lattice_point(cx, cy, cz);
                    corner_id[c] = lattice_id(cx, cy, cz);
                }
                for (int e = 0; e < 12; ++e) {
                    if (!(edges & (1u << e))) continue;
                    int ca = kEdgeCorner[e][0], cb = kEdgeCorner[e][1];
                    int64_t ia = corner_id[ca], ib = corner_id[cb];
                    uint64_t key = ia < ib
                                       ? (static_cast<uint64_t>(ia) << 32) | static_cast<uint64_t>(ib)
                                       : (static_cast<uint64_t>(ib) << 32) | static_cast<uint64_t>(ia);
                    auto it = edge_vertex.find(key);
                    if (it != edge_vertex.end()) {
                        cell_vertex[e] = it->second;
                        continue;
                    }
                    double va = corner_val[ca], vb = corner_val[cb];
                    double dv = vb - va;
                    double t = std::abs(dv) > 0.0 ? clamp01((iso - va) / dv) : 0.5;
                    int vi = static_cast<int>(mesh.vertices.size());
                    mesh.vertices.push_back(lerp(corner_pos[ca], corner_pos[cb], t));
                    edge_vertex.emplace(key, vi);
                    cell_vertex[e] = vi;
                }
                const signed char* tri = kTriTable[index];
                for (int k = 0; tri[k] >= 0; k += 3) {
                    int a = cell_vertex[static_cast<int>(tri[k])];
                    int b = cell_vertex[static_cast<int>(tri[k + 1])];
                    int c = cell_vertex[static_cast<int>(tri[k + 2])];
                    if (a == b || b == c || a == c) continue;  // collapsed by exact-iso corners
                    mesh.faces.push_back({a, b, c});
                }
            }
        }
    }
    return mesh;
}

}  // namespace rfmesh
