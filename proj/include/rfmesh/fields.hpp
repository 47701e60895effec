#pragma once

// Geometry and appearance fields. Geometry: multiresolution grid -> small MLP
// -> clamped exponential density. Appearance: grid -> MLP1 -> sigmoid, split
// into a diffuse color and a specular feature; a second MLP turns (feature,
// view direction encoding) into the specular color. Total color is the sum of
// the diffuse and specular parts, unclamped.

#include <string>
#include <vector>

#include "rfmesh/grid.hpp"
#include "rfmesh/mlp.hpp"
#include "rfmesh/sh.hpp"

namespace rfmesh {

struct FieldConfig {
    int levels = 16;
    int base_res = 16;
    int geo_max_res = 128;
    int app_max_res = 128;
    int geo_channels = 1;
    int app_channels = 2;
    int geo_hidden = 32;
    int app_hidden = 64;
    int spec_hidden = 32;
    double raw_density_clamp = 15.0;
    double grid_init = 1e-4;
};

struct GeometryGrad {
    GridGrad grid;
    MlpGrad mlp;
    void add(const GeometryGrad& o) { grid.add(o.grid); mlp.add(o.mlp); }
    void zero() { grid.zero(); mlp.zero(); }
};

struct AppearanceGrad {
    GridGrad grid;
    MlpGrad mlp1, mlp2;
    void add(const AppearanceGrad& o) { grid.add(o.grid); mlp1.add(o.mlp1); mlp2.add(o.mlp2); }
    void zero() { grid.zero(); mlp1.zero(); mlp2.zero(); }
};

// Per-point forward records, kept so the backward pass does not recompute.
struct GeoPointCache {
    std::vector<double> feat;
    MlpCache mlp;
    double raw = 0.0;      // pre-clamp MLP output
    double sigma = 0.0;
};

struct AppPointCache {
    std::vector<double> feat;
    MlpCache mlp1;
    double logits[6] = {0, 0, 0, 0, 0, 0};
    Vec3 c_d, f_s;         // sigmoid outputs
};

struct SpecPointCache {
    MlpCache mlp2;
    Vec3 view;             // unnormalized view vector as passed in
    double logits[3] = {0, 0, 0};
    Vec3 c_s;
    std::vector<double> input;  // f_s ++ sh(normalize(view))
};

struct GeometryField {
    FeatureGrid grid;
    FieldMLP mlp;
    double raw_clamp = 15.0;

    static GeometryField make(const FieldConfig& cfg, const AABB& domain, Rng& rng);

    double density(const Vec3& x) const;
    double density_cached(const Vec3& x, GeoPointCache& cache) const;

    // dx, when non-null, receives += dL/dx.
    void density_backward(const Vec3& x, const GeoPointCache& cache, double dL_dsigma,
                          GeometryGrad& grad, Vec3* dx) const;
};

struct AppearanceField {
    FeatureGrid grid;
    FieldMLP mlp1;  // encoding -> 3 diffuse + 3 specular-feature logits
    FieldMLP mlp2;  // (specular feature, view SH) -> specular color logits

    static AppearanceField make(const FieldConfig& cfg, const AABB& domain, Rng& rng);

    void eval_base(const Vec3& x, Vec3& c_d, Vec3& f_s, AppPointCache* cache = nullptr) const;

    // view is the unnormalized view vector (point minus ray origin); it is
    // normalized internally so gradients can chain through the normalization.
    Vec3 eval_specular(const Vec3& f_s, const Vec3& view, SpecPointCache* cache = nullptr) const;

    Vec3 eval_color(const Vec3& x, const Vec3& view, bool diffuse_only) const;

    void base_backward(const Vec3& x, const AppPointCache& cache, const Vec3& dL_dcd,
                       const Vec3& dL_dfs, AppearanceGrad& grad, Vec3* dx) const;

    // dview receives += dL/d(unnormalized view); dfs receives += dL/d(f_s).
    void specular_backward(const SpecPointCache& cache, const Vec3& dL_dcs,
                           AppearanceGrad& grad, Vec3* dfs, Vec3* dview) const;
};

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace rfmesh
