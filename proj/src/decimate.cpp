#include "rfmesh/decimate.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <unordered_set>

#include "mesh_edit.hpp"

namespace rfmesh {

namespace {

// Quadric costs vanish on flat geometry, which would leave collapse order to
// vertex-id tie-breaks and breed skinny triangles. A tiny squared-edge-length
// term orders degenerate-cost collapses shortest-first while staying far
// below any real quadric cost.
constexpr double kLengthTieBias = 1e-8;

// Symmetric plane quadric: q(v) = v'Av + 2 b.v + c.
struct Quadric {
    double a00 = 0, a01 = 0, a02 = 0, a11 = 0, a12 = 0, a22 = 0;
    Vec3 b{};
    double c = 0;

    void add_plane(const Vec3& n, double d, double w) {
        a00 += w * n.x * n.x;
        a01 += w * n.x * n.y;
        a02 += w * n.x * n.z;
        a11 += w * n.y * n.y;
        a12 += w * n.y * n.z;
        a22 += w * n.z * n.z;
        b += n * (w * d);
        c += w * d * d;
    }

    Quadric& operator+=(const Quadric& o) {
        a00 += o.a00;
        a01 += o.a01;
        a02 += o.a02;
        a11 += o.a11;
        a12 += o.a12;
        a22 += o.a22;
        b += o.b;
        c += o.c;
        return *this;
    }

    double eval(const Vec3& v) const {
        double vav = a00 * v.x * v.x + a11 * v.y * v.y + a22 * v.z * v.z +
                     2.0 * (a01 * v.x * v.y + a02 * v.x * v.z + a12 * v.y * v.z);
        return vav + 2.0 * dot(b, v) + c;
    }

    // Solves A v = -b. False when A is near singular relative to its scale.
    bool solve(Vec3& out) const {
        double det = a00 * (a11 * a22 - a12 * a12) - a01 * (a01 * a22 - a12 * a02) +
                     a02 * (a01 * a12 - a11 * a02);
        double scale = std::abs(a00) + std::abs(a11) + std::abs(a22);
        if (std::abs(det) <= 1e-10 * scale * scale * scale) return false;
        double inv = 1.0 / det;
        Vec3 r = b * -1.0;
        out.x = inv * (r.x * (a11 * a22 - a12 * a12) + r.y * (a02 * a12 - a01 * a22) +
                       r.z * (a01 * a12 - a02 * a11));
        out.y = inv * (r.x * (a12 * a02 - a01 * a22) + r.y * (a00 * a22 - a02 * a02) +
                       r.z * (a01 * a02 - a00 * a12));
        out.z = inv * (r.x * (a01 * a12 - a11 * a02) + r.y * (a01 * a02 - a00 * a12) +
                       r.z * (a00 * a11 - a01 * a01));
        return is_finite(out);
    }
};

struct Candidate {
    double cost;
    int a, b;           // collapse b into a (a keeps its identity)
    uint32_t va, vb;    // vertex versions at push time
    Vec3 target;

    bool operator<(const Candidate& o) const {
        // priority_queue is a max-heap; order so the cheapest pops first,
        // ties broken by vertex ids for determinism.
        if (cost != o.cost) return cost > o.cost;
        if (a != o.a) return a > o.a;
        return b > o.b;
    }
};

struct QemState {
    EditMesh em;
    std::vector<Quadric> vq;
    std::vector<uint32_t> version;
    std::priority_queue<Candidate> queue;

    void push_edge(int a, int b) {
        if (a > b) std::swap(a, b);
        if (em.pinned[a] && em.pinned[b]) return;
        // Collapse removes `cand.b`; keep pinned vertices as survivors.
        int keep = a, drop = b;
        if (em.pinned[drop]) std::swap(keep, drop);
        Quadric q = vq[keep];
        q += vq[drop];
        Vec3 target;
        if (em.pinned[keep]) {
            target = em.pos[keep];
        } else if (!q.solve(target)) {
            Vec3 cand[3] = {(em.pos[keep] + em.pos[drop]) * 0.5, em.pos[keep], em.pos[drop]};
            target = cand[0];
            double best = q.eval(cand[0]);
            for (int i = 1; i < 3; ++i) {
                double e = q.eval(cand[i]);
                if (e < best) {
                    best = e;
                    target = cand[i];
                }
            }
        }
        double cost = q.eval(target) + kLengthTieBias * norm2(em.pos[a] - em.pos[b]);
        queue.push({cost, keep, drop, version[keep], version[drop], target});
    }
};

}  // namespace

QemOutcome qem_collapse(EditMesh& em, int target_faces) {
    QemOutcome result;
    result.live_before = em.live_faces;

    QemState st{std::move(em), {}, {}, {}};
    st.vq.resize(st.em.pos.size());
    st.version.assign(st.em.pos.size(), 0);
    for (size_t f = 0; f < st.em.faces.size(); ++f) {
        if (st.em.face_dead[f]) continue;
        const auto& tri = st.em.faces[f];
        Vec3 n = st.em.face_normal_raw(static_cast<int>(f));
        double len = norm(n);
        if (len <= 1e-30) continue;
        n = n / len;
        double area = 0.5 * len;
        double d = -dot(n, st.em.pos[tri[0]]);
        for (int c = 0; c < 3; ++c) st.vq[tri[c]].add_plane(n, d, area);
    }
    std::unordered_set<uint64_t> pushed;
    for (size_t f = 0; f < st.em.faces.size(); ++f) {
        if (st.em.face_dead[f]) continue;
        const auto& tri = st.em.faces[f];
        for (int e = 0; e < 3; ++e) {
            int a = tri[e], b = tri[(e + 1) % 3];
            if (pushed.insert(edge_key(a, b)).second) st.push_edge(a, b);
        }
    }

    while (st.em.live_faces > target_faces && !st.queue.empty()) {
        Candidate cand = st.queue.top();
        st.queue.pop();
        if (st.version[cand.a] != cand.va || st.version[cand.b] != cand.vb) continue;
        if (st.em.vfaces[cand.b].empty() || st.em.vfaces[cand.a].empty()) continue;
        if (!st.em.edge_exists(cand.a, cand.b)) continue;
        if (!st.em.collapse_ok(cand.a, cand.b, cand.target)) continue;
        st.vq[cand.a] += st.vq[cand.b];
        st.em.collapse(cand.a, cand.b, cand.target);
        ++st.version[cand.a];
        ++st.version[cand.b];
        for (int w : st.em.vertex_ring(cand.a)) st.push_edge(cand.a, w);
    }

    result.live_after = st.em.live_faces;
    em = std::move(st.em);
    return result;
}

DecimateResult decimate(TriMesh& mesh, int target_faces) {
    if (target_faces < 0) target_faces = 0;
    if (static_cast<int>(mesh.faces.size()) <= target_faces) {
        return {static_cast<int>(mesh.faces.size()), static_cast<int>(mesh.faces.size()), true};
    }
    EditMesh em = EditMesh::from(mesh);
    QemOutcome outcome = qem_collapse(em, target_faces);
    mesh = em.to_mesh();
    return {outcome.live_before, outcome.live_after, outcome.live_after <= target_faces};
}

DecimateResult decimate_region(TriMesh& mesh, const std::vector<int>& region_faces,
                               int target_region_faces) {
    if (target_region_faces < 0) target_region_faces = 0;
    DecimateResult result;
    result.faces_before = static_cast<int>(region_faces.size());
    result.faces_after = result.faces_before;
    result.reached_target = result.faces_before <= target_region_faces;
    if (region_faces.empty() || result.reached_target) return result;

    std::vector<char> in_region(mesh.faces.size(), 0);
    for (int f : region_faces) in_region[f] = 1;

    EditMesh em = EditMesh::from(mesh);
    // Outside faces stay in the edit complex (so edge-manifoldness checks see
    // true incidence at the region boundary) but all their vertices are
    // pinned; pinned vertices never move and never drop, so no collapse can
    // rename or kill an outside face.
    int outside_count = 0;
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        if (in_region[f]) continue;
        ++outside_count;
        for (int c = 0; c < 3; ++c) em.pinned[mesh.faces[f][c]] = 1;
    }

    QemOutcome outcome = qem_collapse(em, target_region_faces + outside_count);
    mesh = em.to_mesh();

    result.faces_after = outcome.live_after - outside_count;
    result.reached_target = result.faces_after <= target_region_faces;
    return result;
}

}  // namespace rfmesh
