#include "rfmesh/trimesh.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_set>

namespace rfmesh {

Vec3 face_normal(const TriMesh& mesh, int f) {
    const auto& tri = mesh.faces[f];
    Vec3 a = mesh.position(tri[0]);
    Vec3 n = cross(mesh.position(tri[1]) - a, mesh.position(tri[2]) - a);
    double len = norm(n);
    if (len <= 0.0) return Vec3{};
    return n / len;
}

double face_area(const TriMesh& mesh, int f) {
    const auto& tri = mesh.faces[f];
    Vec3 a = mesh.position(tri[0]);
    return 0.5 * norm(cross(mesh.position(tri[1]) - a, mesh.position(tri[2]) - a));
}

Vec3 face_centroid(const TriMesh& mesh, int f) {
    const auto& tri = mesh.faces[f];
    return (mesh.position(tri[0]) + mesh.position(tri[1]) + mesh.position(tri[2])) / 3.0;
}

AABB mesh_bounds(const TriMesh& mesh) {
    AABB box;
    for (size_t i = 0; i < mesh.vertices.size(); ++i) box.expand(mesh.position(static_cast<int>(i)));
    return box;
}

double surface_area(const TriMesh& mesh) {
    double total = 0.0;
    for (size_t f = 0; f < mesh.faces.size(); ++f) total += face_area(mesh, static_cast<int>(f));
    return total;
}

double mean_edge_length(const TriMesh& mesh) {
    std::unordered_set<uint64_t> seen;
    seen.reserve(mesh.faces.size() * 3);
    double total = 0.0;
    size_t count = 0;
    for (const auto& tri : mesh.faces) {
        for (int e = 0; e < 3; ++e) {
            int a = tri[e], b = tri[(e + 1) % 3];
            if (a == b) continue;
            if (!seen.insert(edge_key(a, b)).second) continue;
            total += norm(mesh.position(a) - mesh.position(b));
            ++count;
        }
    }
    return count ? total / static_cast<double>(count) : 0.0;
}

std::vector<std::vector<int>> vertex_neighbors(const TriMesh& mesh) {
    std::vector<std::vector<int>> nbr(mesh.vertices.size());
    for (const auto& tri : mesh.faces) {
        for (int e = 0; e < 3; ++e) {
            int a = tri[e], b = tri[(e + 1) % 3];
            if (a == b) continue;
            nbr[a].push_back(b);
            nbr[b].push_back(a);
        }
    }
    for (auto& list : nbr) {
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
    }
    return nbr;
}

std::vector<std::vector<int>> vertex_faces(const TriMesh& mesh) {
    std::vector<std::vector<int>> vf(mesh.vertices.size());
    for (size_t f = 0; f < mesh.faces.size(); ++f)
        for (int c = 0; c < 3; ++c) vf[mesh.faces[f][c]].push_back(static_cast<int>(f));
    return vf;
}

std::unordered_map<uint64_t, std::vector<int>> edge_faces(const TriMesh& mesh) {
    std::unordered_map<uint64_t, std::vector<int>> ef;
    ef.reserve(mesh.faces.size() * 3 / 2);
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& tri = mesh.faces[f];
        for (int e = 0; e < 3; ++e) {
            int a = tri[e], b = tri[(e + 1) % 3];
            if (a == b) continue;
            ef[edge_key(a, b)].push_back(static_cast<int>(f));
        }
    }
    return ef;
}

int remove_unreferenced_vertices(TriMesh& mesh, std::vector<int>* old_to_new) {
    std::vector<char> used(mesh.vertices.size(), 0);
    for (const auto& tri : mesh.faces)
        for (int c = 0; c < 3; ++c) used[tri[c]] = 1;

    std::vector<int> remap(mesh.vertices.size(), -1);
    std::vector<Vec3> verts;
    std::vector<Vec3> offs;
    verts.reserve(mesh.vertices.size());
    bool has_off = mesh.has_offsets();
    if (has_off) offs.reserve(mesh.vertices.size());
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        if (!used[i]) continue;
        remap[i] = static_cast<int>(verts.size());
        verts.push_back(mesh.vertices[i]);
        if (has_off) offs.push_back(mesh.offsets[i]);
    }
    int removed = static_cast<int>(mesh.vertices.size() - verts.size());
    mesh.vertices = std::move(verts);
    mesh.offsets = std::move(offs);
    for (auto& tri : mesh.faces)
        for (int c = 0; c < 3; ++c) tri[c] = remap[tri[c]];
    if (old_to_new) *old_to_new = std::move(remap);
    return removed;
}

std::string MeshAudit::to_string() const {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "audit: invalid_indices=%d nonfinite=%d degenerate=%d duplicate=%d "
                  "nonmanifold_edges=%d boundary_edges=%d isolated_vertices=%d "
                  "orientation_conflicts=%d offsets_mismatched=%d sound=%d",
                  invalid_indices, nonfinite_positions, degenerate_faces, duplicate_faces,
                  nonmanifold_edges, boundary_edges, isolated_vertices, orientation_conflicts,
                  offsets_mismatched ? 1 : 0, sound() ? 1 : 0);
    return buf;
}

MeshAudit audit_mesh(const TriMesh& mesh) {
    MeshAudit a;
    int n = static_cast<int>(mesh.vertices.size());
    a.offsets_mismatched = mesh.has_offsets() && mesh.offsets.size() != mesh.vertices.size();

    for (const Vec3& v : mesh.vertices)
        if (!is_finite(v)) ++a.nonfinite_positions;
    if (!a.offsets_mismatched)
        for (const Vec3& v : mesh.offsets)
            if (!is_finite(v)) ++a.nonfinite_positions;

    std::vector<char> used(n, 0);
    struct TripleHash {
        size_t operator()(const std::array<int, 3>& t) const {
            uint64_t h = 0x9e3779b97f4a7c15ull;
            for (int v : t) {
                h ^= static_cast<uint64_t>(static_cast<uint32_t>(v));
                h *= 0xbf58476d1ce4e5b9ull;
                h ^= h >> 29;
            }
            return static_cast<size_t>(h);
        }
    };
    std::unordered_set<std::array<int, 3>, TripleHash> face_sets;
    face_sets.reserve(mesh.faces.size());
    // Directed edge -> count, for both manifoldness and orientation checks.
    std::unordered_map<uint64_t, int> forward, backward;
    forward.reserve(mesh.faces.size() * 3);
    backward.reserve(mesh.faces.size() * 3);

    for (const auto& tri : mesh.faces) {
        bool valid = true;
        for (int c = 0; c < 3; ++c) {
            if (tri[c] < 0 || tri[c] >= n) {
                valid = false;
            }
        }
        if (!valid) {
            ++a.invalid_indices;
            continue;
        }
        for (int c = 0; c < 3; ++c) used[tri[c]] = 1;
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
            ++a.degenerate_faces;
            continue;
        }
        std::array<int, 3> sorted{tri[0], tri[1], tri[2]};
        std::sort(sorted.begin(), sorted.end());
        if (!face_sets.insert(sorted).second) ++a.duplicate_faces;
        for (int e = 0; e < 3; ++e) {
            int u = tri[e], v = tri[(e + 1) % 3];
            if (u < v)
                ++forward[edge_key(u, v)];
            else
                ++backward[edge_key(u, v)];
        }
    }

    std::unordered_set<uint64_t> keys;
    keys.reserve(forward.size() + backward.size());
    for (const auto& kv : forward) keys.insert(kv.first);
    for (const auto& kv : backward) keys.insert(kv.first);
    for (uint64_t k : keys) {
        auto itf = forward.find(k);
        auto itb = backward.find(k);
        int nf = itf == forward.end() ? 0 : itf->second;
        int nb = itb == backward.end() ? 0 : itb->second;
        int total = nf + nb;
        if (total > 2) ++a.nonmanifold_edges;
        if (total == 1) ++a.boundary_edges;
        // A consistently oriented interior edge is traversed once each way.
        if (nf > 1 || nb > 1) ++a.orientation_conflicts;
    }
    for (int i = 0; i < n; ++i)
        if (!used[i]) ++a.isolated_vertices;
    return a;
}

}  // namespace rfmesh
