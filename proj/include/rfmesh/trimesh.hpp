#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "rfmesh/math.hpp"

namespace rfmesh {

// Indexed triangle mesh. `offsets` is an optional trainable per-vertex
// displacement; when present it must parallel `vertices`, and the effective
// geometry everywhere is position(i) = vertices[i] + offsets[i].
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<Vec3> offsets;
    std::vector<std::array<int, 3>> faces;

    bool has_offsets() const { return !offsets.empty(); }

    void ensure_offsets() {
        if (offsets.size() != vertices.size()) offsets.assign(vertices.size(), Vec3{});
    }

    Vec3 position(int vi) const {
        return has_offsets() ? vertices[vi] + offsets[vi] : vertices[vi];
    }

    // Bakes offsets into the base positions and zeroes them.
    void fold_offsets() {
        if (!has_offsets()) return;
        for (size_t i = 0; i < vertices.size(); ++i) vertices[i] += offsets[i];
        offsets.assign(vertices.size(), Vec3{});
    }
};

// Canonical key for an undirected edge; vertex indices must be < 2^31.
inline uint64_t edge_key(int a, int b) {
    uint32_t lo = static_cast<uint32_t>(a < b ? a : b);
    uint32_t hi = static_cast<uint32_t>(a < b ? b : a);
    return (static_cast<uint64_t>(lo) << 32) | hi;
}

inline int edge_key_a(uint64_t k) { return static_cast<int>(k >> 32); }
inline int edge_key_b(uint64_t k) { return static_cast<int>(k & 0xffffffffu); }

Vec3 face_normal(const TriMesh& mesh, int f);   // unit, zero vector if degenerate
double face_area(const TriMesh& mesh, int f);
Vec3 face_centroid(const TriMesh& mesh, int f);
AABB mesh_bounds(const TriMesh& mesh);          // over effective positions
double surface_area(const TriMesh& mesh);
double mean_edge_length(const TriMesh& mesh);

// Sorted unique one-ring vertex neighborhoods.
std::vector<std::vector<int>> vertex_neighbors(const TriMesh& mesh);
// Face ids incident to each vertex, ascending.
std::vector<std::vector<int>> vertex_faces(const TriMesh& mesh);
// Undirected edge -> incident face ids (in face order).
std::unordered_map<uint64_t, std::vector<int>> edge_faces(const TriMesh& mesh);

// Drops vertices referenced by no face, preserving order. Returns the count
// removed; `old_to_new`, when given, receives the index remap (-1 = dropped).
int remove_unreferenced_vertices(TriMesh& mesh, std::vector<int>* old_to_new = nullptr);

// Structural defect counts. `sound()` is the contract every topology edit
// must maintain; the remaining counters are informational.
struct MeshAudit {
    int invalid_indices = 0;       // out-of-range or negative face entries
    int nonfinite_positions = 0;   // vertices or offsets with NaN/inf
    int degenerate_faces = 0;      // repeated vertex index inside a face
    int duplicate_faces = 0;       // same vertex set as an earlier face
    int nonmanifold_edges = 0;     // edges with > 2 incident faces
    int boundary_edges = 0;        // edges with exactly 1 incident face
    int isolated_vertices = 0;     // vertices in no face
    int orientation_conflicts = 0; // edge traversed twice in the same direction
    bool offsets_mismatched = false;

    bool sound() const {
        return invalid_indices == 0 && nonfinite_positions == 0 && degenerate_faces == 0 &&
               nonmanifold_edges == 0 && !offsets_mismatched;
    }
    std::string to_string() const;
};

MeshAudit audit_mesh(const TriMesh& mesh);

}  // namespace rfmesh
