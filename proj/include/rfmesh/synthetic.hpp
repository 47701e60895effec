#pragma once

// Procedural test scenes with exact geometry. Each scene is a signed distance
// field plus a smooth shading model (procedural albedo, one directional light,
// optional glossy highlight), rendered with sphere tracing. The oracle side
// exposes ground-truth surface queries for evaluation.

#include <string>
#include <vector>

#include <json.hpp>

#include "rfmesh/dataset.hpp"
#include "rfmesh/math.hpp"
#include "rfmesh/rng.hpp"

namespace rfmesh {

enum class ShapeKind { sphere, torus, box_pair };

struct SyntheticScene {
    ShapeKind shape = ShapeKind::sphere;
    double radius = 0.8;        // sphere radius / torus ring radius / box half-extent
    double minor_radius = 0.25; // torus tube radius / box rounding
    double bound = 1.0;         // content fits in [-bound, bound]^3
    Vec3 background{1.0, 1.0, 1.0};
    double gloss = 0.4;         // 0 disables the view-dependent highlight
    double shininess = 16.0;
    Vec3 light_dir = normalize(Vec3{0.5, 0.7, 0.4});

    double sdf(const Vec3& p) const;
    Vec3 sdf_normal(const Vec3& p) const;
    Vec3 albedo(const Vec3& p) const;
    // view_dir points from the camera into the scene.
    Vec3 shade(const Vec3& p, const Vec3& view_dir) const;

    // Sphere-traced first intersection; origin may be inside the bounding box.
    bool trace(const Ray& ray, double& t_hit) const;

    Image render(const CameraModel& cam) const;

    nlohmann::json to_json() const;
    static SyntheticScene from_json(const nlohmann::json& j);
};

struct SyntheticConfig {
    int n_train = 20;
    int n_test = 5;
    int resolution = 64;
    double fov_deg = 48.0;
    double camera_distance_factor = 3.0;  // camera radius = factor * scene bound
};

// Views are placed on a Fibonacci sphere around the origin; every
// round(j*total/n_test)-th view becomes a test view, the rest train. Fully
// determined by (scene, cfg, seed).
Dataset generate_synthetic_dataset(const SyntheticScene& scene, const SyntheticConfig& cfg,
                                   uint64_t seed);

// Ground-truth geometry queries against the analytic scene.
class SurfaceOracle {
  public:
    explicit SurfaceOracle(const SyntheticScene& scene) : scene_(scene) {}

    double signed_distance(const Vec3& p) const { return scene_.sdf(p); }
    bool ray_intersect(const Ray& ray, double& t_hit) const { return scene_.trace(ray, t_hit); }

    // n points on the surface, found by tracing rays from a far sphere toward
    // the origin (rejection on misses).
    std::vector<Vec3> sample_surface(int n, uint64_t seed) const;

  private:
    const SyntheticScene& scene_;
};

}  // namespace rfmesh
