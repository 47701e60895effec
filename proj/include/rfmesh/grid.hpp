#pragma once

// Multi-resolution dense feature grids with trilinear interpolation. Each
// level is a vertex-centered lattice over the same domain; the encoding of a
// point is the concatenation of the interpolated features of all levels.

#include <cstdint>
#include <vector>

#include "rfmesh/math.hpp"
#include "rfmesh/rng.hpp"

namespace rfmesh {

struct GridGrad {
    std::vector<std::vector<double>> values;  // same shapes as FeatureGrid::values

    void add(const GridGrad& o) {
        for (size_t l = 0; l < values.size(); ++l)
            for (size_t i = 0; i < values[l].size(); ++i) values[l][i] += o.values[l][i];
    }
    void zero() {
        for (auto& v : values) std::fill(v.begin(), v.end(), 0.0);
    }
};

struct FeatureGrid {
    int levels = 0;
    int channels = 0;
    std::vector<int> level_res;  // vertices per axis, strictly increasing
    AABB domain;
    std::vector<std::vector<double>> values;  // [level][((z*R + y)*R + x)*C + c]

    // Resolutions follow a geometric progression from base_res to max_res,
    // bumped where rounding would collide. Values start uniform in
    // [-init_scale, init_scale].
    static FeatureGrid make(int levels, int channels, int base_res, int max_res,
                            const AABB& domain, Rng& rng, double init_scale = 1e-4);

    int encoding_dim() const { return levels * channels; }
    size_t param_count() const;

    // out must hold encoding_dim() doubles. Points outside the domain clamp to
    // the boundary.
    void encode(const Vec3& x, double* out) const;

    // Accumulates parameter gradients into grad (resized if empty) and, when
    // dx is non-null, the gradient with respect to the point into *dx.
    void encode_backward(const Vec3& x, const double* dout, GridGrad& grad, Vec3* dx) const;

    GridGrad make_grad() const {
        GridGrad g;
        g.values.resize(values.size());
        for (size_t l = 0; l < values.size(); ++l) g.values[l].assign(values[l].size(), 0.0);
        return g;
    }
};

}  // namespace rfmesh
