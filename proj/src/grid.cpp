#include "rfmesh/grid.hpp"

#include "rfmesh/errors.hpp"

namespace rfmesh {

FeatureGrid FeatureGrid::make(int levels, int channels, int base_res, int max_res,
                              const AABB& domain, Rng& rng, double init_scale) {
    if (levels < 1 || channels < 1 || base_res < 2 || max_res < base_res)
        throw InputError("feature grid: invalid shape parameters");

    FeatureGrid g;
    g.levels = levels;
    g.channels = channels;
    g.domain = domain;
    g.level_res.resize(levels);
    double ratio = levels > 1 ? std::exp(std::log(double(max_res) / base_res) / (levels - 1)) : 1.0;
    for (int l = 0; l < levels; ++l) {
        int r = int(std::llround(base_res * std::pow(ratio, l)));
        // Rounding collisions bump upward; monotonicity beats hitting max_res exactly.
        if (l > 0) r = std::max(r, g.level_res[l - 1] + 1);
        g.level_res[l] = r;
    }
    g.level_res[levels - 1] = std::max(g.level_res[levels - 1], max_res);

    g.values.resize(levels);
    for (int l = 0; l < levels; ++l) {
        size_t n = size_t(g.level_res[l]) * g.level_res[l] * g.level_res[l] * channels;
        g.values[l].resize(n);
        for (auto& v : g.values[l]) v = rng.uniform(-init_scale, init_scale);
    }
    return g;
}

size_t FeatureGrid::param_count() const {
    size_t n = 0;
    for (const auto& v : values) n += v.size();
    return n;
}

namespace {

struct LatticeCoord {
    int i0[3];
    double f[3];
    double scale[3];  // d(lattice pos)/d(world pos); 0 where clamped
};

inline LatticeCoord locate(const Vec3& x, const AABB& domain, int res) {
    LatticeCoord lc;
    for (int a = 0; a < 3; ++a) {
        double span = domain.hi[a] - domain.lo[a];
        double u = (x[a] - domain.lo[a]) / span;
        double s = (res - 1) / span;
        if (u <= 0.0) {
            u = 0.0;
            s = 0.0;
        } else if (u >= 1.0) {
            u = 1.0;
            s = 0.0;
        }
        double pos = u * (res - 1);
        int i0 = std::min(int(pos), res - 2);
        lc.i0[a] = i0;
        lc.f[a] = pos - i0;
        lc.scale[a] = s;
    }
    return lc;
}

}  // namespace

void FeatureGrid::encode(const Vec3& x, double* out) const {
    for (int l = 0; l < levels; ++l) {
        int R = level_res[l];
        LatticeCoord lc = locate(x, domain, R);
        const double* vals = values[l].data();
        double* o = out + size_t(l) * channels;
        for (int c = 0; c < channels; ++c) o[c] = 0.0;

        double wz[2] = {1.0 - lc.f[2], lc.f[2]};
        double wy[2] = {1.0 - lc.f[1], lc.f[1]};
        double wx[2] = {1.0 - lc.f[0], lc.f[0]};
        for (int dz = 0; dz < 2; ++dz)
            for (int dy = 0; dy < 2; ++dy) {
                size_t row =
                    ((size_t(lc.i0[2] + dz) * R + (lc.i0[1] + dy)) * R + lc.i0[0]) * channels;
                double wzy = wz[dz] * wy[dy];
                for (int dx = 0; dx < 2; ++dx) {
                    double w = wzy * wx[dx];
                    const double* v = vals + row + size_t(dx) * channels;
                    for (int c = 0; c < channels; ++c) o[c] += w * v[c];
                }
            }
    }
}

void FeatureGrid::encode_backward(const Vec3& x, const double* dout, GridGrad& grad,
                                  Vec3* dx) const {
    if (grad.values.empty()) grad = make_grad();

    for (int l = 0; l < levels; ++l) {
        int R = level_res[l];
        LatticeCoord lc = locate(x, domain, R);
        const double* vals = values[l].data();
        double* gvals = grad.values[l].data();
        const double* d = dout + size_t(l) * channels;

        double wz[2] = {1.0 - lc.f[2], lc.f[2]};
        double wy[2] = {1.0 - lc.f[1], lc.f[1]};
        double wx[2] = {1.0 - lc.f[0], lc.f[0]};
        double dpos[3] = {0.0, 0.0, 0.0};  // dL/d(lattice position)

        for (int dz = 0; dz < 2; ++dz)
            for (int dy = 0; dy < 2; ++dy) {
                size_t row =
                    ((size_t(lc.i0[2] + dz) * R + (lc.i0[1] + dy)) * R + lc.i0[0]) * channels;
                for (int dxi = 0; dxi < 2; ++dxi) {
                    size_t idx = row + size_t(dxi) * channels;
                    double w = wz[dz] * wy[dy] * wx[dxi];
                    double dv = 0.0;  // sum_c dout[c] * value[c]
                    for (int c = 0; c < channels; ++c) {
                        gvals[idx + c] += w * d[c];
                        dv += d[c] * vals[idx + c];
                    }
                    double sx = dxi == 1 ? 1.0 : -1.0;
                    double sy = dy == 1 ? 1.0 : -1.0;
                    double sz = dz == 1 ? 1.0 : -1.0;
                    dpos[0] += dv * sx * wy[dy] * wz[dz];
                    dpos[1] += dv * sy * wx[dxi] * wz[dz];
                    dpos[2] += dv * sz * wx[dxi] * wy[dy];
                }
            }
        if (dx)
            for (int a = 0; a < 3; ++a) (*dx)[a] += dpos[a] * lc.scale[a];
    }
}

}  // namespace rfmesh
