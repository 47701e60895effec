#pragma once

// Image and geometry metrics.

#include <string>
#include <vector>

#include "rfmesh/camera.hpp"
#include "rfmesh/image.hpp"
#include "rfmesh/math.hpp"

namespace rfmesh {

constexpr double kPsnrCap = 99.0;

// 10 log10(peak^2 / MSE) over all pixels and channels, capped at 99 dB
// (identical images included).
double psnr(const Image& a, const Image& b, double peak = 1.0);

// Anything that can answer "first surface point along this ray".
class SurfacePoints {
  public:
    virtual ~SurfacePoints() = default;
    virtual bool first_hit(const Ray& ray, Vec3& point) const = 0;
};

// Casts one ray per pixel from every camera, keeps first hits, and uniformly
// subsamples to at most n_points. Throws RuntimeFailure if nothing is hit.
std::vector<Vec3> collect_surface_points(const SurfacePoints& surface,
                                         const std::vector<CameraModel>& cameras, int n_points);

// Symmetric Chamfer distance: the average of the two directional means of
// squared nearest-neighbor distances.
double chamfer_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

// Exact nearest-neighbor queries over a fixed point set.
class KdTree {
  public:
    explicit KdTree(std::vector<Vec3> points);
    // Returns the squared distance to the nearest point.
    double nearest_sq(const Vec3& q) const;
    size_t size() const { return points_.size(); }

  private:
    struct Node {
        int axis = -1;     // -1 marks a leaf
        int begin = 0, end = 0;
        double split = 0.0;
        int left = -1, right = -1;
    };
    int build(int begin, int end, int depth);
    void query(int node, const Vec3& q, double& best) const;

    std::vector<Vec3> points_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace rfmesh
