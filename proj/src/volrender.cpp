#include "rfmesh/volrender.hpp"

#include "rfmesh/errors.hpp"
#include "rfmesh/parallel.hpp"

namespace rfmesh {

int sample_along_ray(const Ray& ray, double near, double far, int max_samples,
                     const OccupancyGrid* occ, Rng* rng, std::vector<RaySample>& out) {
    if (!(far > near) || max_samples < 1) return 0;
    double width = (far - near) / max_samples;
    size_t first = out.size();

    for (int s = 0; s < max_samples; ++s) {
        double u = rng ? rng->uniform() : 0.5;
        double t = near + (s + u) * width;
        Vec3 x = ray.at(t);
        if (occ && !occ->test(x)) continue;
        RaySample rs;
        rs.t = t;
        rs.x = x;
        out.push_back(rs);
    }

    int n = int(out.size() - first);
    for (int i = 0; i + 1 < n; ++i) out[first + i].delta = out[first + i + 1].t - out[first + i].t;
    if (n > 0) out[first + n - 1].delta = std::max(far - out[first + n - 1].t, width);
    return n;
}

QuadratureResult composite_ray(const double* sigma, const Vec3* color, const double* delta,
                               int n, const Vec3& background, double* weights) {
    Vec3 acc{0, 0, 0};
    double T = 1.0;
    for (int i = 0; i < n; ++i) {
        double a = 1.0 - std::exp(-sigma[i] * delta[i]);
        double w = T * a;
        acc += color[i] * w;
        if (weights) weights[i] = w;
        T *= 1.0 - a;
    }
    QuadratureResult r;
    r.opacity = 1.0 - T;
    r.color = acc + background * T;
    return r;
}

void composite_ray_backward(const double* sigma, const Vec3* color, const double* delta, int n,
                            const Vec3& background, const Vec3& dL_dcolor, double dL_dopacity,
                            double* dsigma, Vec3* dcolor) {
    thread_local std::vector<double> trans;  // T_{i+1} after sample i
    trans.resize(n);
    double T = 1.0;
    for (int i = 0; i < n; ++i) {
        double a = 1.0 - std::exp(-sigma[i] * delta[i]);
        dcolor[i] = dL_dcolor * (T * a);
        T *= 1.0 - a;
        trans[i] = T;
    }
    double T_n = n > 0 ? trans[n - 1] : 1.0;

    // dC/dsigma_i = delta_i (T_{i+1} c_i - R_i), R_i = sum_{k>i} w_k c_k + T_n bg;
    // dO/dsigma_i = delta_i T_n.
    Vec3 R = background * T_n;
    for (int i = n - 1; i >= 0; --i) {
        double T_next = trans[i];
        Vec3 dC = (color[i] * T_next - R) * delta[i];
        dsigma[i] = dot(dL_dcolor, dC) + dL_dopacity * delta[i] * T_n;
        double T_i = i > 0 ? trans[i - 1] : 1.0;
        double a = 1.0 - std::exp(-sigma[i] * delta[i]);
        R += color[i] * (T_i * a);
    }
}

double loss_render(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt) {
    double s = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) s += norm2(pred[i] - gt[i]);
    return pred.empty() ? 0.0 : s / double(pred.size());
}

double loss_specular_l2(const std::vector<Vec3>& c_s) {
    double s = 0.0;
    for (const Vec3& c : c_s) s += norm2(c);
    return c_s.empty() ? 0.0 : s / double(c_s.size());
}

double entropy_term(double a) {
    double h = 0.0;
    if (a > 0.0 && a < 1.0) h = -(a * std::log(a) + (1.0 - a) * std::log(1.0 - a));
    return h;
}

double entropy_term_grad(double a) {
    if (a <= 0.0 || a >= 1.0) return 0.0;
    return std::log((1.0 - a) / a);
}

double loss_entropy(const std::vector<double>& alpha) {
    double s = 0.0;
    for (double a : alpha) s += entropy_term(a);
    return alpha.empty() ? 0.0 : s / double(alpha.size());
}

double loss_total_variation(const FeatureGrid& grid, GridGrad* grad) {
    if (grad && grad->values.empty()) *grad = grid.make_grad();

    // First pass counts the adjacent pairs so the mean's scale is known before
    // gradients are written.
    int64_t pairs = 0;
    for (int l = 0; l < grid.levels; ++l) {
        int64_t R = grid.level_res[l];
        pairs += 3 * (R - 1) * R * R * grid.channels;
    }
    if (pairs == 0) return 0.0;

    double total = 0.0;
    int C = grid.channels;
    for (int l = 0; l < grid.levels; ++l) {
        int R = grid.level_res[l];
        const double* v = grid.values[l].data();
        double* g = grad ? grad->values[l].data() : nullptr;
        auto idx = [&](int x, int y, int z) { return ((size_t(z) * R + y) * R + x) * C; };
        int step[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
        for (int axis = 0; axis < 3; ++axis) {
            for (int z = 0; z < R - (axis == 2); ++z)
                for (int y = 0; y < R - (axis == 1); ++y)
                    for (int x = 0; x < R - (axis == 0); ++x) {
                        size_t i0 = idx(x, y, z);
                        size_t i1 = idx(x + step[axis][0], y + step[axis][1], z + step[axis][2]);
                        for (int c = 0; c < C; ++c) {
                            double d = v[i1 + c] - v[i0 + c];
                            total += d * d;
                            if (g) {
                                double gd = 2.0 * d / double(pairs);
                                g[i1 + c] += gd;
                                g[i0 + c] -= gd;
                            }
                        }
                    }
        }
    }
    return total / double(pairs);
}

Image render_view(const GeometryField& geo, const AppearanceField& app,
                  const OccupancyGrid* occ, const CameraModel& cam, const AABB& domain,
                  const Vec3& background, int max_samples, bool diffuse_only) {
    Image img(cam.width, cam.height);
    parallel_chunks(cam.height, 0, [&](int, int64_t y0, int64_t y1) {
        std::vector<RaySample> samples;
        std::vector<double> sigma, delta;
        std::vector<Vec3> colors;
        for (int64_t y = y0; y < y1; ++y)
            for (int x = 0; x < cam.width; ++x) {
                Ray ray = cam.pixel_ray(x, int(y));
                double t0, t1;
                if (!intersect_aabb(ray, domain, t0, t1)) {
                    img.set(x, int(y), clamp01(background));
                    continue;
                }
                samples.clear();
                sample_along_ray(ray, std::max(t0, 1e-6), t1, max_samples, occ, nullptr, samples);
                int n = int(samples.size());
                sigma.resize(n);
                delta.resize(n);
                colors.resize(n);
                for (int i = 0; i < n; ++i) {
                    sigma[i] = geo.density(samples[i].x);
                    delta[i] = samples[i].delta;
                    colors[i] =
                        app.eval_color(samples[i].x, samples[i].x - ray.origin, diffuse_only);
                }
                QuadratureResult q =
                    composite_ray(sigma.data(), colors.data(), delta.data(), n, background);
                img.set(x, int(y), clamp01(q.color));
            }
    });
    return img;
}

}  // namespace rfmesh
