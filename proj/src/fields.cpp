#include "rfmesh/fields.hpp"

namespace rfmesh {

GeometryField GeometryField::make(const FieldConfig& cfg, const AABB& domain, Rng& rng) {
    GeometryField f;
    f.grid = FeatureGrid::make(cfg.levels, cfg.geo_channels, cfg.base_res, cfg.geo_max_res,
                               domain, rng, cfg.grid_init);
    f.mlp = FieldMLP::make({f.grid.encoding_dim(), cfg.geo_hidden, 1}, rng);
    f.raw_clamp = cfg.raw_density_clamp;
    return f;
}

double GeometryField::density(const Vec3& x) const {
    thread_local std::vector<double> feat;
    feat.resize(grid.encoding_dim());
    grid.encode(x, feat.data());
    double raw;
    mlp.forward(feat.data(), &raw);
    return std::exp(std::clamp(raw, -raw_clamp, raw_clamp));
}

double GeometryField::density_cached(const Vec3& x, GeoPointCache& cache) const {
    cache.feat.resize(grid.encoding_dim());
    grid.encode(x, cache.feat.data());
    mlp.forward(cache.feat.data(), &cache.raw, &cache.mlp);
    cache.sigma = std::exp(std::clamp(cache.raw, -raw_clamp, raw_clamp));
    return cache.sigma;
}

void GeometryField::density_backward(const Vec3& x, const GeoPointCache& cache,
                                     double dL_dsigma, GeometryGrad& grad, Vec3* dx) const {
    // d sigma / d raw = sigma inside the clamp window, 0 outside.
    double draw = 0.0;
    if (cache.raw > -raw_clamp && cache.raw < raw_clamp) draw = dL_dsigma * cache.sigma;
    if (draw == 0.0) return;

    thread_local std::vector<double> dfeat;
    dfeat.resize(grid.encoding_dim());
    mlp.backward(cache.mlp, &draw, grad.mlp, dfeat.data());
    grid.encode_backward(x, dfeat.data(), grad.grid, dx);
}

AppearanceField AppearanceField::make(const FieldConfig& cfg, const AABB& domain, Rng& rng) {
    AppearanceField f;
    f.grid = FeatureGrid::make(cfg.levels, cfg.app_channels, cfg.base_res, cfg.app_max_res,
                               domain, rng, cfg.grid_init);
    f.mlp1 = FieldMLP::make({f.grid.encoding_dim(), cfg.app_hidden, cfg.app_hidden, 6}, rng);
    f.mlp2 = FieldMLP::make({3 + kShDim, cfg.spec_hidden, 3}, rng);
    return f;
}

void AppearanceField::eval_base(const Vec3& x, Vec3& c_d, Vec3& f_s,
                                AppPointCache* cache) const {
    thread_local std::vector<double> feat;
    thread_local MlpCache tl_cache;
    std::vector<double>& fv = cache ? cache->feat : feat;
    fv.resize(grid.encoding_dim());
    grid.encode(x, fv.data());

    double logits[6];
    mlp1.forward(fv.data(), logits, cache ? &cache->mlp1 : nullptr);
    c_d = {sigmoid(logits[0]), sigmoid(logits[1]), sigmoid(logits[2])};
    f_s = {sigmoid(logits[3]), sigmoid(logits[4]), sigmoid(logits[5])};
    if (cache) {
        for (int i = 0; i < 6; ++i) cache->logits[i] = logits[i];
        cache->c_d = c_d;
        cache->f_s = f_s;
    }
}

Vec3 AppearanceField::eval_specular(const Vec3& f_s, const Vec3& view,
                                    SpecPointCache* cache) const {
    double in[3 + kShDim];
    in[0] = f_s.x;
    in[1] = f_s.y;
    in[2] = f_s.z;
    sh_basis(normalize(view), in + 3);

    double logits[3];
    mlp2.forward(in, logits, cache ? &cache->mlp2 : nullptr);
    Vec3 c_s{sigmoid(logits[0]), sigmoid(logits[1]), sigmoid(logits[2])};
    if (cache) {
        cache->view = view;
        for (int i = 0; i < 3; ++i) cache->logits[i] = logits[i];
        cache->c_s = c_s;
        cache->input.assign(in, in + 3 + kShDim);
    }
    return c_s;
}

Vec3 AppearanceField::eval_color(const Vec3& x, const Vec3& view, bool diffuse_only) const {
    Vec3 c_d, f_s;
    eval_base(x, c_d, f_s);
    if (diffuse_only) return c_d;
    return c_d + eval_specular(f_s, view);
}

void AppearanceField::base_backward(const Vec3& x, const AppPointCache& cache,
                                    const Vec3& dL_dcd, const Vec3& dL_dfs,
                                    AppearanceGrad& grad, Vec3* dx) const {
    double dlogits[6];
    for (int i = 0; i < 3; ++i) {
        double s = cache.c_d[i];
        dlogits[i] = dL_dcd[i] * s * (1.0 - s);
    }
    for (int i = 0; i < 3; ++i) {
        double s = cache.f_s[i];
        dlogits[3 + i] = dL_dfs[i] * s * (1.0 - s);
    }

    thread_local std::vector<double> dfeat;
    dfeat.resize(grid.encoding_dim());
    mlp1.backward(cache.mlp1, dlogits, grad.mlp1, dfeat.data());
    grid.encode_backward(x, dfeat.data(), grad.grid, dx);
}

void AppearanceField::specular_backward(const SpecPointCache& cache, const Vec3& dL_dcs,
                                        AppearanceGrad& grad, Vec3* dfs, Vec3* dview) const {
    double dlogits[3];
    for (int i = 0; i < 3; ++i) {
        double s = cache.c_s[i];
        dlogits[i] = dL_dcs[i] * s * (1.0 - s);
    }

    double din[3 + kShDim];
    mlp2.backward(cache.mlp2, dlogits, grad.mlp2, din);
    if (dfs) *dfs += Vec3{din[0], din[1], din[2]};
    if (dview) *dview += sh_chain_unnormalized(cache.view, din + 3);
}

}  // namespace rfmesh
