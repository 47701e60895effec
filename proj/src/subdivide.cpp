#include "rfmesh/subdivide.hpp"

#include <array>
#include <unordered_map>
#include <unordered_set>

#include "rfmesh/errors.hpp"

namespace rfmesh {

SubdivideResult midpoint_subdivide(TriMesh& mesh, const std::vector<int>& face_ids,
                                   double min_edge) {
    SubdivideResult result;
    int m = static_cast<int>(mesh.faces.size());
    for (int f : face_ids)
        if (f < 0 || f >= m) throw InputError("subdivide: face id out of range");

    std::vector<char> selected(m, 0);
    for (int f : face_ids) {
        const auto& tri = mesh.faces[f];
        bool ok = tri[0] != tri[1] && tri[1] != tri[2] && tri[0] != tri[2];
        for (int e = 0; e < 3 && ok; ++e) {
            Vec3 d = mesh.position(tri[e]) - mesh.position(tri[(e + 1) % 3]);
            if (norm(d) < min_edge) ok = false;
        }
        if (ok) selected[f] = 1;
    }

    // One midpoint per split edge, created in face order for determinism.
    std::unordered_map<uint64_t, int> midpoint;
    bool has_off = mesh.has_offsets();
    for (int f = 0; f < m; ++f) {
        if (!selected[f]) continue;
        const auto& tri = mesh.faces[f];
        for (int e = 0; e < 3; ++e) {
            int a = tri[e], b = tri[(e + 1) % 3];
            uint64_t key = edge_key(a, b);
            if (midpoint.count(key)) continue;
            int vi = static_cast<int>(mesh.vertices.size());
            mesh.vertices.push_back((mesh.vertices[a] + mesh.vertices[b]) * 0.5);
            if (has_off) mesh.offsets.push_back((mesh.offsets[a] + mesh.offsets[b]) * 0.5);
            midpoint.emplace(key, vi);
            ++result.midpoints_added;
        }
    }
    if (midpoint.empty()) {
        result.parent.resize(m);
        for (int f = 0; f < m; ++f) result.parent[f] = f;
        return result;
    }

    std::vector<std::array<int, 3>> out;
    out.reserve(mesh.faces.size() + 3 * midpoint.size());
    std::vector<int> parent;
    parent.reserve(out.capacity());
    auto emit = [&](int a, int b, int c, int from) {
        out.push_back({a, b, c});
        parent.push_back(from);
    };

    for (int f = 0; f < m; ++f) {
        std::array<int, 3> tri = mesh.faces[f];
        int mid[3];
        int splits = 0;
        auto fetch = [&](const std::array<int, 3>& t) {
            splits = 0;
            for (int e = 0; e < 3; ++e) {
                auto it = midpoint.find(edge_key(t[e], t[(e + 1) % 3]));
                mid[e] = it == midpoint.end() ? -1 : it->second;
                if (mid[e] >= 0) ++splits;
            }
        };
        fetch(tri);
        if (splits == 0) {
            emit(tri[0], tri[1], tri[2], f);
            continue;
        }
        if (splits == 3) {
            emit(tri[0], mid[0], mid[2], f);
            emit(mid[0], tri[1], mid[1], f);
            emit(mid[2], mid[1], tri[2], f);
            emit(mid[0], mid[1], mid[2], f);
            if (selected[f]) ++result.faces_subdivided;
            continue;
        }
        // Rotate so the configuration is canonical: one split -> split edge
        // is (v0,v1); two splits -> the unsplit edge is (v2,v0).
        auto rotate = [&]() {
            tri = {tri[1], tri[2], tri[0]};
            fetch(tri);
        };
        if (splits == 1) {
            while (mid[0] < 0) rotate();
            emit(tri[0], mid[0], tri[2], f);
            emit(mid[0], tri[1], tri[2], f);
        } else {
            while (!(mid[0] >= 0 && mid[1] >= 0 && mid[2] < 0)) rotate();
            emit(mid[0], tri[1], mid[1], f);
            emit(tri[0], mid[0], tri[2], f);
            emit(mid[0], mid[1], tri[2], f);
        }
    }

    mesh.faces = std::move(out);
    result.parent = std::move(parent);
    return result;
}

}  // namespace rfmesh
