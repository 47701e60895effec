#pragma once

// Adam with bias correction. Grids and MLPs share betas but use different eps.

#include <cmath>
#include <cstdint>
#include <vector>

namespace rfmesh {

struct AdamState {
    std::vector<double> m, v;
    int64_t t = 0;
};

inline void adam_step(std::vector<double>& p, const std::vector<double>& g, AdamState& s,
                      double lr, double beta1, double beta2, double eps) {
    if (s.m.size() != p.size()) {
        s.m.assign(p.size(), 0.0);
        s.v.assign(p.size(), 0.0);
        s.t = 0;
    }
    ++s.t;
    double c1 = 1.0 - std::pow(beta1, double(s.t));
    double c2 = 1.0 - std::pow(beta2, double(s.t));
    for (size_t i = 0; i < p.size(); ++i) {
        double gi = g[i];
        double m = s.m[i] = beta1 * s.m[i] + (1.0 - beta1) * gi;
        double v = s.v[i] = beta2 * s.v[i] + (1.0 - beta2) * gi * gi;
        p[i] -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
    }
}

}  // namespace rfmesh
