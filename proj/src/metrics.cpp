#include "rfmesh/metrics.hpp"

#include <algorithm>

#include "rfmesh/errors.hpp"
#include "rfmesh/parallel.hpp"

namespace rfmesh {

double psnr(const Image& a, const Image& b, double peak) {
    if (a.width != b.width || a.height != b.height)
        throw InputError("psnr: image sizes differ");
    double se = 0.0;
    for (size_t i = 0; i < a.rgb.size(); ++i) se += sqr(a.rgb[i] - b.rgb[i]);
    double mse = se / double(a.rgb.size());
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

std::vector<Vec3> collect_surface_points(const SurfacePoints& surface,
                                         const std::vector<CameraModel>& cameras, int n_points) {
    std::vector<Vec3> hits;
    for (const CameraModel& cam : cameras) {
        std::vector<std::vector<Vec3>> rows(cam.height);
        parallel_chunks(cam.height, 0, [&](int, int64_t y0, int64_t y1) {
            for (int64_t y = y0; y < y1; ++y)
                for (int x = 0; x < cam.width; ++x) {
                    Vec3 p;
                    if (surface.first_hit(cam.pixel_ray(x, int(y)), p)) rows[y].push_back(p);
                }
        });
        for (auto& r : rows) hits.insert(hits.end(), r.begin(), r.end());
    }
    if (hits.empty()) throw RuntimeFailure("surface sampling: no camera ray hit the surface");

    if (int(hits.size()) <= n_points) return hits;
    std::vector<Vec3> out;
    out.reserve(n_points);
    for (int i = 0; i < n_points; ++i)
        out.push_back(hits[size_t(i) * hits.size() / n_points]);
    return out;
}

double chamfer_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.empty() || b.empty()) throw RuntimeFailure("chamfer: empty point set");
    KdTree ta(a), tb(b);

    auto directional = [](const std::vector<Vec3>& from, const KdTree& to) {
        std::vector<double> partial(worker_count(), 0.0);
        parallel_chunks(int64_t(from.size()), 0, [&](int w, int64_t i0, int64_t i1) {
            double s = 0.0;
            for (int64_t i = i0; i < i1; ++i) s += to.nearest_sq(from[i]);
            partial[w] += s;
        });
        double s = 0.0;
        for (double p : partial) s += p;
        return s / double(from.size());
    };
    return 0.5 * (directional(a, tb) + directional(b, ta));
}

KdTree::KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
    if (!points_.empty()) root_ = build(0, int(points_.size()), 0);
}

int KdTree::build(int begin, int end, int depth) {
    Node n;
    n.begin = begin;
    n.end = end;
    int id = int(nodes_.size());
    nodes_.push_back(n);
    if (end - begin <= 8) return id;

    AABB box;
    for (int i = begin; i < end; ++i) box.expand(points_[i]);
    Vec3 ext = box.extent();
    int axis = 0;
    if (ext.y > ext[axis]) axis = 1;
    if (ext.z > ext[axis]) axis = 2;

    int mid = (begin + end) / 2;
    std::nth_element(points_.begin() + begin, points_.begin() + mid, points_.begin() + end,
                     [axis](const Vec3& p, const Vec3& q) { return p[axis] < q[axis]; });
    double split = points_[mid][axis];

    int left = build(begin, mid, depth + 1);
    int right = build(mid, end, depth + 1);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

void KdTree::query(int node, const Vec3& q, double& best) const {
    const Node& n = nodes_[node];
    if (n.axis < 0) {
        for (int i = n.begin; i < n.end; ++i) best = std::min(best, norm2(points_[i] - q));
        return;
    }
    double d = q[n.axis] - n.split;
    int near = d < 0.0 ? n.left : n.right;
    int far = d < 0.0 ? n.right : n.left;
    query(near, q, best);
    if (d * d < best) query(far, q, best);
}

double KdTree::nearest_sq(const Vec3& q) const {
    if (root_ < 0) return kInf;
    double best = kInf;
    query(root_, q, best);
    return best;
}

}  // namespace rfmesh
