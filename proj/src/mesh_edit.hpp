#pragma once

// Internal working structure for incremental edge edits (collapse / split /
// flip) shared by the decimation and remeshing passes. Not installed.

#include <algorithm>
#include <array>
#include <vector>

#include "rfmesh/math.hpp"
#include "rfmesh/trimesh.hpp"

namespace rfmesh {

struct EditMesh {
    std::vector<Vec3> pos;
    std::vector<std::array<int, 3>> faces;
    std::vector<char> face_dead;
    std::vector<std::vector<int>> vfaces;  // live face ids per vertex, exact
    std::vector<char> pinned;
    int live_faces = 0;

    static EditMesh from(const TriMesh& mesh) {
        EditMesh em;
        em.pos.resize(mesh.vertices.size());
        for (size_t i = 0; i < mesh.vertices.size(); ++i)
            em.pos[i] = mesh.position(static_cast<int>(i));
        em.faces = mesh.faces;
        em.face_dead.assign(em.faces.size(), 0);
        em.pinned.assign(em.pos.size(), 0);
        em.vfaces.resize(em.pos.size());
        for (size_t f = 0; f < em.faces.size(); ++f)
            for (int c = 0; c < 3; ++c) em.vfaces[em.faces[f][c]].push_back(static_cast<int>(f));
        em.live_faces = static_cast<int>(em.faces.size());
        return em;
    }

    // Compacts live faces and referenced vertices into a plain mesh.
    // `vertex_map`, when given, receives old-vertex -> new-vertex (-1 dropped).
    TriMesh to_mesh(std::vector<int>* vertex_map = nullptr) const {
        TriMesh out;
        std::vector<int> remap(pos.size(), -1);
        for (size_t f = 0; f < faces.size(); ++f) {
            if (face_dead[f]) continue;
            std::array<int, 3> tri;
            for (int c = 0; c < 3; ++c) {
                int v = faces[f][c];
                if (remap[v] < 0) {
                    remap[v] = static_cast<int>(out.vertices.size());
                    out.vertices.push_back(pos[v]);
                }
                tri[c] = remap[v];
            }
            out.faces.push_back(tri);
        }
        if (vertex_map) *vertex_map = std::move(remap);
        return out;
    }

    bool face_has(int f, int v) const {
        const auto& tri = faces[f];
        return tri[0] == v || tri[1] == v || tri[2] == v;
    }

    double face_area_now(int f) const {
        const auto& tri = faces[f];
        return 0.5 * norm(cross(pos[tri[1]] - pos[tri[0]], pos[tri[2]] - pos[tri[0]]));
    }

    Vec3 face_normal_raw(int f) const {
        const auto& tri = faces[f];
        return cross(pos[tri[1]] - pos[tri[0]], pos[tri[2]] - pos[tri[0]]);
    }

    // Unique neighbor vertices of v over live faces, ascending.
    std::vector<int> vertex_ring(int v) const {
        std::vector<int> ring;
        for (int f : vfaces[v]) {
            const auto& tri = faces[f];
            for (int c = 0; c < 3; ++c)
                if (tri[c] != v) ring.push_back(tri[c]);
        }
        std::sort(ring.begin(), ring.end());
        ring.erase(std::unique(ring.begin(), ring.end()), ring.end());
        return ring;
    }

    void faces_on_edge(int a, int b, std::vector<int>& out) const {
        out.clear();
        const auto& list = vfaces[a].size() <= vfaces[b].size() ? vfaces[a] : vfaces[b];
        int other = vfaces[a].size() <= vfaces[b].size() ? b : a;
        for (int f : list)
            if (face_has(f, other)) out.push_back(f);
    }

    // Geometric veto for moving vertex `v` to `target`: any live face at v
    // (excluding `dying`) whose normal reverses or collapses rejects the move.
    bool move_flips_face(int v, const Vec3& target, int skip_with) const {
        for (int f : vfaces[v]) {
            if (skip_with >= 0 && face_has(f, skip_with)) continue;
            const auto& tri = faces[f];
            Vec3 p[3], q[3];
            for (int c = 0; c < 3; ++c) {
                p[c] = pos[tri[c]];
                q[c] = tri[c] == v ? target : pos[tri[c]];
            }
            Vec3 n0 = cross(p[1] - p[0], p[2] - p[0]);
            Vec3 n1 = cross(q[1] - q[0], q[2] - q[0]);
            double area1 = norm(n1);
            if (area1 <= 1e-30) return true;
            if (dot(n0, n1) <= 0.0) return true;
        }
        return false;
    }

    // Link condition: the shared ring of a and b must be exactly the apex
    // vertices of the live faces on edge (a,b). Prevents pinching the surface
    // into a non-manifold configuration.
    bool link_ok(int a, int b) const {
        std::vector<int> ra = vertex_ring(a), rb = vertex_ring(b);
        std::vector<int> shared;
        std::set_intersection(ra.begin(), ra.end(), rb.begin(), rb.end(),
                              std::back_inserter(shared));
        std::vector<int> ef;
        faces_on_edge(a, b, ef);
        if (ef.empty() || ef.size() > 2) return false;
        std::vector<int> apex;
        for (int f : ef) {
            const auto& tri = faces[f];
            for (int c = 0; c < 3; ++c)
                if (tri[c] != a && tri[c] != b) apex.push_back(tri[c]);
        }
        std::sort(apex.begin(), apex.end());
        apex.erase(std::unique(apex.begin(), apex.end()), apex.end());
        return shared == apex;
    }

    // Full validity check for collapsing b into a at `target`. Respects pins:
    // b must be unpinned; a pinned forces target == pos[a] (caller's duty).
    bool collapse_ok(int a, int b, const Vec3& target) const {
        if (pinned[b]) return false;
        if (!link_ok(a, b)) return false;
        if (move_flips_face(a, target, b)) return false;
        if (move_flips_face(b, target, a)) return false;
        return true;
    }

    // Collapses b into a, moving a to `target`. Faces on the edge die.
    void collapse(int a, int b, const Vec3& target) {
        std::vector<int> bfaces = vfaces[b];
        for (int f : bfaces) {
            if (face_has(f, a)) {
                kill_face(f);
                continue;
            }
            auto& tri = faces[f];
            for (int c = 0; c < 3; ++c)
                if (tri[c] == b) tri[c] = a;
            vfaces[a].push_back(f);
        }
        vfaces[b].clear();
        pos[a] = target;
    }

    // Splits edge (a,b): each live face on it becomes two, the new vertex sits
    // at `point`. Returns the new vertex id, or -1 if the edge has no faces.
    int split_edge(int a, int b, const Vec3& point) {
        std::vector<int> ef;
        faces_on_edge(a, b, ef);
        if (ef.empty()) return -1;
        int m = static_cast<int>(pos.size());
        pos.push_back(point);
        pinned.push_back(0);
        vfaces.emplace_back();
        for (int f : ef) {
            auto tri = faces[f];
            // Rotate so the split edge is (tri[0], tri[1]).
            while (!((tri[0] == a && tri[1] == b) || (tri[0] == b && tri[1] == a))) {
                int t0 = tri[0];
                tri[0] = tri[1];
                tri[1] = tri[2];
                tri[2] = t0;
            }
            kill_face(f);
            add_face({tri[0], m, tri[2]});
            add_face({m, tri[1], tri[2]});
        }
        return m;
    }

    bool edge_exists(int a, int b) const {
        for (int f : vfaces[a])
            if (face_has(f, b)) return true;
        return false;
    }

    // Replaces the diagonal of the quad (faces on edge a-b) with c-d. Only
    // valid for interior edges with exactly two faces.
    bool flip_edge(int a, int b) {
        std::vector<int> ef;
        faces_on_edge(a, b, ef);
        if (ef.size() != 2) return false;
        int f1 = ef[0], f2 = ef[1];
        // Orient so f1 traverses a->b.
        {
            const auto& t = faces[f1];
            bool forward = (t[0] == a && t[1] == b) || (t[1] == a && t[2] == b) ||
                           (t[2] == a && t[0] == b);
            if (!forward) std::swap(f1, f2);
        }
        int c = -1, d = -1;
        for (int x : faces[f1])
            if (x != a && x != b) c = x;
        for (int x : faces[f2])
            if (x != a && x != b) d = x;
        if (c < 0 || d < 0 || c == d) return false;
        if (edge_exists(c, d)) return false;
        // New triangles (a,d,c) and (b,c,d); veto degenerate or reversed ones.
        Vec3 n1 = cross(pos[d] - pos[a], pos[c] - pos[a]);
        Vec3 n2 = cross(pos[c] - pos[b], pos[d] - pos[b]);
        if (norm(n1) <= 1e-30 || norm(n2) <= 1e-30) return false;
        Vec3 old_n = face_normal_raw(f1) + face_normal_raw(f2);
        if (dot(old_n, n1) <= 0.0 || dot(old_n, n2) <= 0.0) return false;
        kill_face(f1);
        kill_face(f2);
        add_face({a, d, c});
        add_face({b, c, d});
        return true;
    }

    int vertex_valence(int v) const { return static_cast<int>(vertex_ring(v).size()); }

    bool boundary_vertex(int v) const {
        // A vertex is on the boundary when some incident edge has one face.
        std::vector<int> ef;
        for (int w : vertex_ring(v)) {
            faces_on_edge(v, w, ef);
            if (ef.size() == 1) return true;
        }
        return false;
    }

    void kill_face(int f) {
        if (face_dead[f]) return;
        face_dead[f] = 1;
        --live_faces;
        for (int c = 0; c < 3; ++c) {
            auto& list = vfaces[faces[f][c]];
            auto it = std::find(list.begin(), list.end(), f);
            if (it != list.end()) list.erase(it);
        }
    }

    int add_face(const std::array<int, 3>& tri) {
        int f = static_cast<int>(faces.size());
        faces.push_back(tri);
        face_dead.push_back(0);
        ++live_faces;
        for (int c = 0; c < 3; ++c) vfaces[tri[c]].push_back(f);
        return f;
    }
};

// Quadric-error collapse down to `target_live_faces` live faces, honoring
// pins. Kills faces but never adds or renames pinned-only ones; defined in
// decimate.cpp. Returns live faces before/after.
struct QemOutcome {
    int live_before = 0;
    int live_after = 0;
};
QemOutcome qem_collapse(EditMesh& em, int target_live_faces);

}  // namespace rfmesh
