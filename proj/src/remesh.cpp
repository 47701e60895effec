#include "rfmesh/remesh.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "rfmesh/errors.hpp"
#include "mesh_edit.hpp"

namespace rfmesh {

namespace {

constexpr double kSplitFactor = 4.0 / 3.0;
constexpr double kCollapseFactor = 4.0 / 5.0;
constexpr int kRounds = 3;

}  // namespace

RemeshResult remesh_region(TriMesh& mesh, const std::vector<int>& region_faces,
                           double target_edge) {
    RemeshResult result;
    result.region_faces_before = static_cast<int>(region_faces.size());
    result.region_faces_after = result.region_faces_before;
    if (region_faces.empty() || target_edge <= 0.0 || !(target_edge < kInf)) return result;
    int m = static_cast<int>(mesh.faces.size());
    for (int f : region_faces)
        if (f < 0 || f >= m) throw InputError("remesh: face id out of range");

    EditMesh em = EditMesh::from(mesh);
    // region[f] tracks which live faces belong to the selection; faces added
    // by splits/flips are always region faces because only region-interior
    // edges are ever edited. Outside faces are immutable: all their vertices
    // are pinned, pinned vertices never move or collapse away.
    std::vector<char> region(em.faces.size(), 0);
    for (int f : region_faces) region[f] = 1;
    int outside_count = 0;
    for (size_t f = 0; f < em.faces.size(); ++f) {
        if (region[f]) continue;
        ++outside_count;
        for (int c = 0; c < 3; ++c) em.pinned[em.faces[f][c]] = 1;
    }
    auto sync_region = [&]() {
        while (region.size() < em.faces.size()) region.push_back(1);
    };
    auto live_region_faces = [&]() {
        int count = 0;
        for (size_t f = 0; f < em.faces.size(); ++f)
            if (!em.face_dead[f] && region[f]) ++count;
        return count;
    };
    // An edge may be split or flipped only when every incident live face is a
    // region face (editing it can then never crack the frozen outside).
    auto edge_interior = [&](int a, int b, std::vector<int>& scratch) {
        em.faces_on_edge(a, b, scratch);
        if (scratch.size() != 2) return false;
        for (int f : scratch)
            if (!region[f]) return false;
        return true;
    };

    // Frozen edges (rim edges shared with the outside, open boundaries) can
    // never be split, yet a face leaning on a frozen edge of length L always
    // keeps a side of length >= L/2: asking for edges finer than that spawns
    // an endless cascade of needle faces fanning around the rim endpoints.
    // Half the longest frozen edge is therefore the finest honest target.
    std::vector<int> scratch;
    double rim_max = 0.0;
    for (int f : region_faces) {
        const auto& tri = em.faces[f];
        for (int e = 0; e < 3; ++e) {
            int a = tri[e], b = tri[(e + 1) % 3];
            if (edge_interior(a, b, scratch)) continue;
            rim_max = std::max(rim_max, norm(em.pos[a] - em.pos[b]));
        }
    }
    double target_eff = std::max(target_edge, 0.5 * rim_max);

    // Phase 1: quadric decimation to the equilateral budget for the area.
    double region_area = 0.0;
    for (int f : region_faces) region_area += face_area(mesh, f);
    double tri_area = std::sqrt(3.0) / 4.0 * target_eff * target_eff;
    int budget = std::max(1, static_cast<int>(std::lround(region_area / tri_area)));
    if (live_region_faces() > budget) {
        qem_collapse(em, budget + outside_count);
        sync_region();  // collapse only kills faces; sizes match regardless
    }

    // Phase 2: split long / collapse short / flip toward valence 6.
    double split_limit = kSplitFactor * target_eff;
    double collapse_limit = kCollapseFactor * target_eff;
    for (int round = 0; round < kRounds; ++round) {
        // Long-edge splits, globally longest first. Splitting the longest
        // edge of a face only creates edges shorter than that face's longest
        // side, so the queue drains instead of cascading. New over-limit
        // edges (cross edges into skinny faces) join the same pass.
        struct LongEdge {
            double len;
            int a, b;
            bool operator<(const LongEdge& o) const {  // max-heap by length
                if (len != o.len) return len < o.len;
                if (a != o.a) return a > o.a;
                return b > o.b;
            }
        };
        std::priority_queue<LongEdge> to_split;
        auto push_long = [&](int a, int b) {
            if (a > b) std::swap(a, b);
            double len = norm(em.pos[a] - em.pos[b]);
            if (len > split_limit) to_split.push({len, a, b});
        };
        for (size_t f = 0; f < em.faces.size(); ++f) {
            if (em.face_dead[f] || !region[f]) continue;
            const auto& tri = em.faces[f];
            for (int e = 0; e < 3; ++e) {
                int a = tri[e], b = tri[(e + 1) % 3];
                if (a < b) push_long(a, b);
            }
        }
        // Safety net against degenerate input geometry (e.g. pre-existing
        // needle fans). Derived from the fixed budget, never from live face
        // counts: a count-fed cap would grow with whatever it failed to stop.
        int splits_left = 8 * budget + 1024;
        while (!to_split.empty() && splits_left > 0) {
            auto [len, a, b] = to_split.top();
            to_split.pop();
            if (!em.edge_exists(a, b)) continue;  // consumed by an earlier split
            if (!edge_interior(a, b, scratch)) continue;
            int mid = em.split_edge(a, b, (em.pos[a] + em.pos[b]) * 0.5);
            if (mid < 0) continue;
            sync_region();
            --splits_left;
            for (int w : em.vertex_ring(mid)) push_long(mid, w);
        }

        // Short-edge collapses, shortest first.
        struct ShortEdge {
            double len;
            int a, b;
            bool operator<(const ShortEdge& o) const {
                if (len != o.len) return len < o.len;
                if (a != o.a) return a < o.a;
                return b < o.b;
            }
        };
        std::vector<ShortEdge> to_collapse;
        for (size_t f = 0; f < em.faces.size(); ++f) {
            if (em.face_dead[f] || !region[f]) continue;
            const auto& tri = em.faces[f];
            for (int e = 0; e < 3; ++e) {
                int a = tri[e], b = tri[(e + 1) % 3];
                if (a > b) continue;
                double len = norm(em.pos[a] - em.pos[b]);
                if (len < collapse_limit) to_collapse.push_back({len, a, b});
            }
        }
        std::sort(to_collapse.begin(), to_collapse.end());
        to_collapse.erase(std::unique(to_collapse.begin(), to_collapse.end(),
                                      [](const ShortEdge& x, const ShortEdge& y) {
                                          return x.a == y.a && x.b == y.b;
                                      }),
                          to_collapse.end());
        for (const ShortEdge& edge : to_collapse) {
            int keep = edge.a, drop = edge.b;
            if (!em.edge_exists(keep, drop)) continue;
            if (em.pinned[keep] && em.pinned[drop]) continue;
            if (em.pinned[drop]) std::swap(keep, drop);
            if (norm(em.pos[keep] - em.pos[drop]) >= collapse_limit) continue;
            Vec3 target = em.pinned[keep] ? em.pos[keep] : (em.pos[keep] + em.pos[drop]) * 0.5;
            // Keep the result isotropic: collapses must not manufacture edges
            // longer than the split limit.
            bool too_long = false;
            for (int w : em.vertex_ring(drop)) {
                if (w == keep) continue;
                if (norm(em.pos[w] - target) > split_limit) {
                    too_long = true;
                    break;
                }
            }
            for (int w : em.vertex_ring(keep)) {
                if (too_long) break;
                if (w == drop) continue;
                if (norm(em.pos[w] - target) > split_limit) too_long = true;
            }
            if (too_long) continue;
            if (!em.collapse_ok(keep, drop, target)) continue;
            em.collapse(keep, drop, target);
        }

        // Valence-regularizing flips on interior region edges.
        std::vector<std::pair<int, int>> candidates;
        for (size_t f = 0; f < em.faces.size(); ++f) {
            if (em.face_dead[f] || !region[f]) continue;
            const auto& tri = em.faces[f];
            for (int e = 0; e < 3; ++e) {
                int a = tri[e], b = tri[(e + 1) % 3];
                if (a < b) candidates.emplace_back(a, b);
            }
        }
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
        auto target_valence = [&](int v) { return em.boundary_vertex(v) ? 4 : 6; };
        for (auto [a, b] : candidates) {
            if (!em.edge_exists(a, b)) continue;
            if (!edge_interior(a, b, scratch)) continue;
            int f1 = scratch[0], f2 = scratch[1];
            int c = -1, d = -1;
            for (int x : em.faces[f1])
                if (x != a && x != b) c = x;
            for (int x : em.faces[f2])
                if (x != a && x != b) d = x;
            if (c < 0 || d < 0 || c == d) continue;
            auto dev = [&](int v, int delta) {
                int diff = em.vertex_valence(v) + delta - target_valence(v);
                return diff * diff;
            };
            int before = dev(a, 0) + dev(b, 0) + dev(c, 0) + dev(d, 0);
            int after = dev(a, -1) + dev(b, -1) + dev(c, 1) + dev(d, 1);
            if (after >= before) continue;
            if (em.flip_edge(a, b)) sync_region();
        }
    }

    result.region_faces_after = live_region_faces();
    // to_mesh keeps live faces in index order, so the compacted ids follow.
    int next_id = 0;
    for (size_t f = 0; f < em.faces.size(); ++f) {
        if (em.face_dead[f]) continue;
        if (region[f]) result.region_after.push_back(next_id);
        ++next_id;
    }
    mesh = em.to_mesh();
    return result;
}

}  // namespace rfmesh
