#include "rfmesh/synthetic.hpp"

#include <cstdio>

#include "rfmesh/errors.hpp"
#include "rfmesh/parallel.hpp"

namespace rfmesh {

using nlohmann::json;

namespace {

double sd_box(const Vec3& p, const Vec3& half, double rounding) {
    Vec3 q = Vec3{std::abs(p.x), std::abs(p.y), std::abs(p.z)} - half;
    Vec3 qp = max(q, Vec3{0.0, 0.0, 0.0});
    double outside = norm(qp);
    double inside = std::min(0.0, std::max(q.x, std::max(q.y, q.z)));
    return outside + inside - rounding;
}

}  // namespace

double SyntheticScene::sdf(const Vec3& p) const {
    switch (shape) {
        case ShapeKind::sphere:
            return norm(p) - radius;
        case ShapeKind::torus: {
            double ring = std::sqrt(p.x * p.x + p.y * p.y) - radius;
            return std::sqrt(ring * ring + p.z * p.z) - minor_radius;
        }
        case ShapeKind::box_pair: {
            Vec3 h{radius * 0.7, radius * 0.5, radius * 0.6};
            double a = sd_box(p - Vec3{-radius * 0.25, 0.0, 0.0}, h, minor_radius * 0.3);
            double b = sd_box(p - Vec3{radius * 0.45, radius * 0.3, radius * 0.2},
                              h * 0.55, minor_radius * 0.3);
            return std::min(a, b);
        }
    }
    return kInf;
}

Vec3 SyntheticScene::sdf_normal(const Vec3& p) const {
    if (shape == ShapeKind::sphere) return normalize(p);
    const double h = 1e-6;
    Vec3 g{sdf({p.x + h, p.y, p.z}) - sdf({p.x - h, p.y, p.z}),
           sdf({p.x, p.y + h, p.z}) - sdf({p.x, p.y - h, p.z}),
           sdf({p.x, p.y, p.z + h}) - sdf({p.x, p.y, p.z - h})};
    return normalize(g);
}

Vec3 SyntheticScene::albedo(const Vec3& p) const {
    // Smooth and bounded away from 0/1 so a sigmoid head can represent it.
    return {0.55 + 0.30 * std::sin(3.0 * p.x + 2.0 * p.y),
            0.55 + 0.30 * std::sin(3.0 * p.y + 2.0 * p.z + 1.7),
            0.55 + 0.30 * std::sin(3.0 * p.z + 2.0 * p.x + 3.9)};
}

Vec3 SyntheticScene::shade(const Vec3& p, const Vec3& view_dir) const {
    Vec3 n = sdf_normal(p);
    double lambert = std::max(0.0, dot(n, light_dir));
    Vec3 c = albedo(p) * (0.35 + 0.55 * lambert);
    if (gloss > 0.0) {
        Vec3 h = normalize(light_dir - view_dir);
        double s = std::pow(std::max(0.0, dot(n, h)), shininess);
        c += Vec3{1.0, 1.0, 1.0} * (gloss * s);
    }
    return c;
}

bool SyntheticScene::trace(const Ray& ray, double& t_hit) const {
    AABB box = AABB::cube(bound);
    double t0, t1;
    if (!intersect_aabb(ray, box, t0, t1)) return false;

    double t = t0;
    double prev_t = t0;
    const double eps = 1e-7;
    for (int step = 0; step < 1024 && t <= t1 + 1e-6; ++step) {
        double sd = sdf(ray.at(t));
        if (sd < eps) {
            // Bisect between the last known outside point and the hit.
            double lo = prev_t, hi = t;
            for (int i = 0; i < 40; ++i) {
                double mid = 0.5 * (lo + hi);
                if (sdf(ray.at(mid)) < eps)
                    hi = mid;
                else
                    lo = mid;
            }
            t_hit = hi;
            return true;
        }
        prev_t = t;
        t += std::max(sd, 1e-6);
    }
    return false;
}

Image SyntheticScene::render(const CameraModel& cam) const {
    Image img(cam.width, cam.height);
    parallel_chunks(cam.height, 0, [&](int, int64_t y0, int64_t y1) {
        for (int64_t y = y0; y < y1; ++y)
            for (int x = 0; x < cam.width; ++x) {
                Ray r = cam.pixel_ray(int(x), int(y));
                double t;
                Vec3 c = trace(r, t) ? shade(r.at(t), r.dir) : background;
                img.set(int(x), int(y), c);
            }
    });
    return img;
}

json SyntheticScene::to_json() const {
    json j;
    j["shape"] = shape == ShapeKind::sphere  ? "sphere"
                 : shape == ShapeKind::torus ? "torus"
                                             : "box_pair";
    j["radius"] = radius;
    j["minor_radius"] = minor_radius;
    j["bound"] = bound;
    j["background"] = {background.x, background.y, background.z};
    j["gloss"] = gloss;
    j["shininess"] = shininess;
    j["light_dir"] = {light_dir.x, light_dir.y, light_dir.z};
    return j;
}

SyntheticScene SyntheticScene::from_json(const json& j) {
    SyntheticScene s;
    std::string shape = j.value("shape", "sphere");
    if (shape == "sphere")
        s.shape = ShapeKind::sphere;
    else if (shape == "torus")
        s.shape = ShapeKind::torus;
    else if (shape == "box_pair")
        s.shape = ShapeKind::box_pair;
    else
        throw InputError("unknown synthetic shape: " + shape);
    s.radius = j.value("radius", 0.8);
    s.minor_radius = j.value("minor_radius", 0.25);
    s.bound = j.value("bound", 1.0);
    if (j.contains("background"))
        s.background = {j["background"][0], j["background"][1], j["background"][2]};
    s.gloss = j.value("gloss", 0.4);
    s.shininess = j.value("shininess", 16.0);
    if (j.contains("light_dir"))
        s.light_dir = normalize(Vec3{j["light_dir"][0], j["light_dir"][1], j["light_dir"][2]});
    return s;
}

Dataset generate_synthetic_dataset(const SyntheticScene& scene, const SyntheticConfig& cfg,
                                   uint64_t seed) {
    if (cfg.n_train < 1 || cfg.resolution < 2)
        throw InputError("synthetic: need n_train >= 1 and resolution >= 2");
    (void)seed;  // the rig is deterministic; seed reserved for future jittered rigs

    int total = cfg.n_train + cfg.n_test;
    std::vector<bool> is_test(total, false);
    for (int j = 0; j < cfg.n_test; ++j)
        is_test[std::min(total - 1, int(std::llround(double(j) * total / cfg.n_test)))] = true;

    Dataset ds;
    ds.scene_bound = scene.bound;
    ds.background = scene.background;
    ds.scene_desc = scene.to_json();

    const double golden = kPi * (3.0 - std::sqrt(5.0));
    double dist = cfg.camera_distance_factor * scene.bound;
    int n_train_done = 0, n_test_done = 0;
    for (int i = 0; i < total; ++i) {
        // Fibonacci sphere, elevation compressed to avoid the exact poles.
        double z = 0.85 * (1.0 - 2.0 * (i + 0.5) / total);
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        double phi = golden * i;
        Vec3 dir{r * std::cos(phi), r * std::sin(phi), z};

        PosedImage pi;
        pi.camera = CameraModel::look_at(dir * dist, Vec3{0.0, 0.0, 0.0}, Vec3{0.0, 0.0, 1.0},
                                         cfg.resolution, cfg.resolution,
                                         cfg.fov_deg * kPi / 180.0);
        pi.pixels = scene.render(pi.camera);
        pi.split = is_test[i] ? Split::test : Split::train;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "r_%03d.png",
                      is_test[i] ? n_test_done++ : n_train_done++);
        pi.name = buf;
        ds.images.push_back(std::move(pi));
    }
    return ds;
}

std::vector<Vec3> SurfaceOracle::sample_surface(int n, uint64_t seed) const {
    std::vector<Vec3> pts;
    pts.reserve(n);
    Rng rng(seed);
    double far = 2.5 * scene_.bound;
    int guard = 0;
    while (int(pts.size()) < n) {
        if (++guard > 100 * n + 1000)
            throw RuntimeFailure("surface sampling failed to converge");
        Vec3 u = rng.uniform_unit_vector();
        Ray ray{u * far, -u};
        double t;
        if (scene_.trace(ray, t)) pts.push_back(ray.at(t));
    }
    return pts;
}

}  // namespace rfmesh
