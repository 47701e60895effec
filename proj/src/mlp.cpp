#include "rfmesh/mlp.hpp"

#include "rfmesh/errors.hpp"

namespace rfmesh {

FieldMLP FieldMLP::make(const std::vector<int>& dims, Rng& rng) {
    if (dims.size() < 2) throw InputError("mlp: need at least input and output dims");
    FieldMLP net;
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        Layer layer;
        layer.in = dims[l];
        layer.out = dims[l + 1];
        layer.w.resize(size_t(layer.in) * layer.out);
        layer.b.assign(layer.out, 0.0);
        double bound = std::sqrt(6.0 / layer.in);
        for (auto& w : layer.w) w = rng.uniform(-bound, bound);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

size_t FieldMLP::param_count() const {
    size_t n = 0;
    for (const auto& l : layers) n += l.w.size() + l.b.size();
    return n;
}

void FieldMLP::forward(const double* in, double* out, MlpCache* cache) const {
    thread_local std::vector<double> buf_a, buf_b;
    const double* cur = in;
    if (cache) {
        cache->input.assign(in, in + layers.front().in);
        cache->z.resize(layers.size());
    }

    for (size_t l = 0; l < layers.size(); ++l) {
        const Layer& L = layers[l];
        bool last = l + 1 == layers.size();
        std::vector<double>* znext = nullptr;
        double* dst;
        if (last) {
            dst = out;
        } else {
            std::vector<double>& buf = (l % 2 == 0) ? buf_a : buf_b;
            buf.resize(L.out);
            dst = buf.data();
        }
        for (int o = 0; o < L.out; ++o) {
            const double* wrow = L.w.data() + size_t(o) * L.in;
            double s = L.b[o];
            for (int i = 0; i < L.in; ++i) s += wrow[i] * cur[i];
            dst[o] = s;
        }
        if (cache) {
            znext = &cache->z[l];
            znext->assign(dst, dst + L.out);
        }
        if (!last)
            for (int o = 0; o < L.out; ++o)
                if (dst[o] < 0.0) dst[o] = 0.0;
        cur = dst;
    }
}

void FieldMLP::backward(const MlpCache& cache, const double* dout, MlpGrad& grad,
                        double* din) const {
    if (grad.w.empty()) grad = make_grad();

    thread_local std::vector<double> delta, delta_prev;
    int L = int(layers.size());
    delta.assign(dout, dout + layers.back().out);

    for (int l = L - 1; l >= 0; --l) {
        const Layer& layer = layers[l];
        // Activated input to this layer.
        thread_local std::vector<double> act;
        const double* a;
        if (l == 0) {
            a = cache.input.data();
        } else {
            const std::vector<double>& zprev = cache.z[l - 1];
            act.resize(zprev.size());
            for (size_t i = 0; i < zprev.size(); ++i) act[i] = zprev[i] > 0.0 ? zprev[i] : 0.0;
            a = act.data();
        }

        double* gw = grad.w[l].data();
        double* gb = grad.b[l].data();
        for (int o = 0; o < layer.out; ++o) {
            double d = delta[o];
            gb[o] += d;
            double* gwrow = gw + size_t(o) * layer.in;
            for (int i = 0; i < layer.in; ++i) gwrow[i] += d * a[i];
        }

        if (l == 0 && !din) break;
        delta_prev.assign(layer.in, 0.0);
        for (int o = 0; o < layer.out; ++o) {
            double d = delta[o];
            const double* wrow = layers[l].w.data() + size_t(o) * layer.in;
            for (int i = 0; i < layer.in; ++i) delta_prev[i] += d * wrow[i];
        }
        if (l > 0) {
            const std::vector<double>& zprev = cache.z[l - 1];
            for (int i = 0; i < layer.in; ++i)
                if (zprev[i] <= 0.0) delta_prev[i] = 0.0;
        }
        delta.swap(delta_prev);
    }
    if (din)
        for (int i = 0; i < layers.front().in; ++i) din[i] = delta[i];
}

}  // namespace rfmesh
