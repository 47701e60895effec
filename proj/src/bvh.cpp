#include "rfmesh/bvh.hpp"

#include <algorithm>

namespace rfmesh {

static constexpr int kLeafSize = 8;

Bvh Bvh::build(const TriMesh& mesh) {
    Bvh bvh;
    bvh.pos_.resize(mesh.vertices.size());
    for (size_t i = 0; i < mesh.vertices.size(); ++i)
        bvh.pos_[i] = mesh.position(static_cast<int>(i));
    bvh.faces_ = mesh.faces;
    if (bvh.faces_.empty()) return bvh;

    int m = static_cast<int>(bvh.faces_.size());
    std::vector<Vec3> centroids(m);
    for (int f = 0; f < m; ++f) {
        const auto& tri = bvh.faces_[f];
        centroids[f] = (bvh.pos_[tri[0]] + bvh.pos_[tri[1]] + bvh.pos_[tri[2]]) / 3.0;
    }
    std::vector<int> ids(m);
    for (int f = 0; f < m; ++f) ids[f] = f;
    bvh.nodes_.reserve(2 * m);
    bvh.build_node(ids, 0, m, centroids);
    bvh.order_ = std::move(ids);
    return bvh;
}

int Bvh::build_node(std::vector<int>& ids, int begin, int end,
                    const std::vector<Vec3>& centroids) {
    int node_id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    AABB box;
    for (int i = begin; i < end; ++i) {
        const auto& tri = faces_[ids[i]];
        for (int c = 0; c < 3; ++c) box.expand(pos_[tri[c]]);
    }
    nodes_[node_id].box = box;

    if (end - begin <= kLeafSize) {
        nodes_[node_id].first = begin;
        nodes_[node_id].count = end - begin;
        return node_id;
    }

    AABB cbox;
    for (int i = begin; i < end; ++i) cbox.expand(centroids[ids[i]]);
    Vec3 ext = cbox.extent();
    int axis = 0;
    if (ext.y > ext.x) axis = 1;
    if (ext.z > ext[axis]) axis = 2;
    int mid = (begin + end) / 2;
    std::nth_element(ids.begin() + begin, ids.begin() + mid, ids.begin() + end,
                     [&](int a, int b) {
                         double ca = centroids[a][axis], cb = centroids[b][axis];
                         return ca < cb || (ca == cb && a < b);
                     });
    int left = build_node(ids, begin, mid, centroids);
    int right = build_node(ids, mid, end, centroids);
    nodes_[node_id].left = left;
    nodes_[node_id].right = right;
    return node_id;
}

bool Bvh::first_hit(const Ray& ray, BvhHit& hit, double t_min, double t_max) const {
    hit = BvhHit{};
    if (nodes_.empty()) return false;
    double limit = t_max;
    int stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& node = nodes_[stack[--top]];
        double t0, t1;
        if (!intersect_aabb(ray, node.box, t0, t1)) continue;
        if (t0 > limit) continue;
        if (node.count > 0) {
            for (int i = 0; i < node.count; ++i) {
                int f = order_[node.first + i];
                const auto& tri = faces_[f];
                double t, u, v;
                if (!intersect_triangle(ray, pos_[tri[0]], pos_[tri[1]], pos_[tri[2]], t_min,
                                        limit, t, u, v))
                    continue;
                if (t < hit.t || (t == hit.t && f < hit.face)) {
                    hit.face = f;
                    hit.t = t;
                    hit.b1 = u;
                    hit.b2 = v;
                    limit = t;
                }
            }
            continue;
        }
        // Push the farther child first so the nearer is explored next.
        double l0, l1, r0, r1;
        bool hl = intersect_aabb(ray, nodes_[node.left].box, l0, l1);
        bool hr = intersect_aabb(ray, nodes_[node.right].box, r0, r1);
        if (hl && hr) {
            if (l0 <= r0) {
                stack[top++] = node.right;
                stack[top++] = node.left;
            } else {
                stack[top++] = node.left;
                stack[top++] = node.right;
            }
        } else if (hl) {
            stack[top++] = node.left;
        } else if (hr) {
            stack[top++] = node.right;
        }
    }
    return hit.face >= 0;
}

}  // namespace rfmesh
