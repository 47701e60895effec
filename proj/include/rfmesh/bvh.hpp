#pragma once

#include <array>
#include <vector>

#include "rfmesh/math.hpp"
#include "rfmesh/trimesh.hpp"

namespace rfmesh {

struct BvhHit {
    int face = -1;
    double t = kInf;
    double b1 = 0.0, b2 = 0.0;  // barycentrics of the 2nd/3rd face corners
};

// Static bounding-volume hierarchy over a snapshot of a mesh's effective
// geometry. Equal-t intersections resolve to the lower face id, so queries
// are independent of build traversal order.
class Bvh {
public:
    static Bvh build(const TriMesh& mesh);

    bool first_hit(const Ray& ray, BvhHit& hit, double t_min = 1e-9, double t_max = kInf) const;
    bool empty() const { return faces_.empty(); }
    const std::vector<Vec3>& positions() const { return pos_; }
    const std::vector<std::array<int, 3>>& faces() const { return faces_; }

private:
    struct Node {
        AABB box;
        int left = -1, right = -1;  // children, or -1 on leaves
        int first = 0, count = 0;   // leaf range into order_
    };

    std::vector<Node> nodes_;
    std::vector<int> order_;
    std::vector<Vec3> pos_;
    std::vector<std::array<int, 3>> faces_;

    int build_node(std::vector<int>& ids, int begin, int end,
                   const std::vector<Vec3>& centroids);
};

}  // namespace rfmesh
