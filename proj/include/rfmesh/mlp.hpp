#pragma once

// Fully connected nets with ReLU hidden layers and a linear output layer.
// Forward can record a cache that backward consumes; all gradients are
// accumulated (callers zero their buffers).

#include <vector>

#include "rfmesh/rng.hpp"

namespace rfmesh {

struct MlpGrad {
    std::vector<std::vector<double>> w;
    std::vector<std::vector<double>> b;

    void add(const MlpGrad& o) {
        for (size_t l = 0; l < w.size(); ++l) {
            for (size_t i = 0; i < w[l].size(); ++i) w[l][i] += o.w[l][i];
            for (size_t i = 0; i < b[l].size(); ++i) b[l][i] += o.b[l][i];
        }
    }
    void zero() {
        for (auto& v : w) std::fill(v.begin(), v.end(), 0.0);
        for (auto& v : b) std::fill(v.begin(), v.end(), 0.0);
    }
};

// Scratch recorded by forward: the input and every layer's pre-activation.
struct MlpCache {
    std::vector<double> input;
    std::vector<std::vector<double>> z;
};

struct FieldMLP {
    struct Layer {
        int in = 0, out = 0;
        std::vector<double> w;  // row-major [out][in]
        std::vector<double> b;
    };
    std::vector<Layer> layers;

    // dims = {in, hidden..., out}. Kaiming-uniform weights (bound sqrt(6/fan_in)),
    // zero biases.
    static FieldMLP make(const std::vector<int>& dims, Rng& rng);

    int input_dim() const { return layers.front().in; }
    int output_dim() const { return layers.back().out; }
    size_t param_count() const;

    // out must hold output_dim() doubles.
    void forward(const double* in, double* out, MlpCache* cache = nullptr) const;

    // din may be null when the input gradient is not needed.
    void backward(const MlpCache& cache, const double* dout, MlpGrad& grad, double* din) const;

    MlpGrad make_grad() const {
        MlpGrad g;
        g.w.resize(layers.size());
        g.b.resize(layers.size());
        for (size_t l = 0; l < layers.size(); ++l) {
            g.w[l].assign(layers[l].w.size(), 0.0);
            g.b[l].assign(layers[l].b.size(), 0.0);
        }
        return g;
    }
};

}  // namespace rfmesh
