#include "rfmesh/train_stage1.hpp"

#include <cmath>
#include <cstdarg>

#include "rfmesh/adam.hpp"
#include "rfmesh/errors.hpp"
#include "rfmesh/metrics.hpp"
#include "rfmesh/parallel.hpp"
#include "rfmesh/volrender.hpp"

namespace rfmesh {

double lr_schedule(double lr_start, double lr_final, int step, int steps) {
    if (steps <= 1) return lr_final;
    double f = double(step) / double(steps - 1);
    return lr_start * std::pow(lr_final / lr_start, f);
}

namespace {

// Everything one ray carries from the forward to the backward phase.
struct RayData {
    Ray ray;
    Vec3 gt;
    uint64_t jitter_seed = 0;
    bool hits_domain = false;

    std::vector<RaySample> samples;
    std::vector<double> sigma, delta, weights, dsigma;
    std::vector<Vec3> colors, dcolor;
    std::vector<GeoPointCache> geo_cache;
    std::vector<AppPointCache> app_cache;
    std::vector<SpecPointCache> spec_cache;
    std::vector<uint8_t> color_evaluated;
    Vec3 pred;
};

struct ParamGroup {
    std::vector<double>* p;
    std::vector<double>* g;
    double eps;
    AdamState state;
};

std::vector<ParamGroup> make_groups(GeometryField& geo, AppearanceField& app,
                                    GeometryGrad& ggrad, AppearanceGrad& agrad,
                                    double eps_grid, double eps_mlp) {
    std::vector<ParamGroup> groups;
    for (int l = 0; l < geo.grid.levels; ++l)
        groups.push_back({&geo.grid.values[l], &ggrad.grid.values[l], eps_grid, {}});
    for (size_t l = 0; l < geo.mlp.layers.size(); ++l) {
        groups.push_back({&geo.mlp.layers[l].w, &ggrad.mlp.w[l], eps_mlp, {}});
        groups.push_back({&geo.mlp.layers[l].b, &ggrad.mlp.b[l], eps_mlp, {}});
    }
    for (int l = 0; l < app.grid.levels; ++l)
        groups.push_back({&app.grid.values[l], &agrad.grid.values[l], eps_grid, {}});
    auto add_mlp = [&](FieldMLP& net, MlpGrad& grad) {
        for (size_t l = 0; l < net.layers.size(); ++l) {
            groups.push_back({&net.layers[l].w, &grad.w[l], eps_mlp, {}});
            groups.push_back({&net.layers[l].b, &grad.b[l], eps_mlp, {}});
        }
    };
    add_mlp(app.mlp1, agrad.mlp1);
    add_mlp(app.mlp2, agrad.mlp2);
    return groups;
}

}  // namespace

Stage1Report train_stage1(const Dataset& ds, const Stage1Config& cfg, uint64_t seed,
                          GeometryField& geo, AppearanceField& app, OccupancyGrid& occ,
                          std::FILE* log) {
    std::vector<int> train_ids = ds.split_indices(Split::train);
    if (train_ids.empty()) throw InputError("stage1: dataset has no training views");
    const AABB domain = geo.grid.domain;

    int workers = worker_count();
    std::vector<GeometryGrad> geo_grads(workers);
    std::vector<AppearanceGrad> app_grads(workers);
    for (int w = 0; w < workers; ++w) {
        geo_grads[w].grid = geo.grid.make_grad();
        geo_grads[w].mlp = geo.mlp.make_grad();
        app_grads[w].grid = app.grid.make_grad();
        app_grads[w].mlp1 = app.mlp1.make_grad();
        app_grads[w].mlp2 = app.mlp2.make_grad();
    }
    std::vector<ParamGroup> groups = make_groups(geo, app, geo_grads[0], app_grads[0],
                                                 cfg.adam_eps_grid, cfg.adam_eps_mlp);

    Rng draw_rng(splitmix64(seed ^ 0x51a9e1ULL));
    uint64_t occ_seed = splitmix64(seed ^ 0x0ccULL);

    std::vector<RayData> rays;
    Stage1Report report;
    double ema_samples = std::max(8.0, cfg.max_samples_per_ray * 0.25);
    Vec3 bg = ds.background;

    auto logf = [&](const char* fmt, ...) {
        char buf[512];
        va_list ap;
        va_start(ap, fmt);
        std::vsnprintf(buf, sizeof(buf), fmt, ap);
        va_end(ap);
        report.log_lines.emplace_back(buf);
        if (log) {
            std::fputs(buf, log);
            std::fputc('\n', log);
            std::fflush(log);
        }
    };

    for (int step = 0; step < cfg.steps; ++step) {
        bool diffuse_only = step < cfg.diffuse_only_steps;
        double lr = lr_schedule(cfg.lr_start, cfg.lr_final, step, cfg.steps);

        int n_rays = int(std::max(1.0, double(cfg.points_per_step) / std::max(1.0, ema_samples)));
        n_rays = std::min(n_rays, cfg.points_per_step);
        if (int(rays.size()) < n_rays) rays.resize(n_rays);

        // Ray draw is serial so the sample stream is independent of threading.
        for (int r = 0; r < n_rays; ++r) {
            RayData& rd = rays[r];
            const PosedImage& im = ds.images[train_ids[draw_rng.uniform_int(train_ids.size())]];
            int px = int(draw_rng.uniform_int(int64_t(im.pixels.width) * im.pixels.height));
            int x = px % im.pixels.width, y = px / im.pixels.width;
            rd.ray = im.camera.pixel_ray(x, y);
            rd.gt = im.pixels.at(x, y);
            rd.jitter_seed = draw_rng.next_u64();
        }

        // Forward: sampling, densities, selected colors, compositing.
        std::vector<int64_t> w_samples(workers, 0), w_color(workers, 0);
        parallel_chunks(n_rays, 0, [&](int w, int64_t r0, int64_t r1) {
            for (int64_t r = r0; r < r1; ++r) {
                RayData& rd = rays[r];
                rd.samples.clear();
                double t0, t1;
                rd.hits_domain = intersect_aabb(rd.ray, domain, t0, t1) && t1 > t0 + 1e-9;
                if (rd.hits_domain) {
                    Rng jr(rd.jitter_seed);
                    sample_along_ray(rd.ray, std::max(t0, 1e-6), t1, cfg.max_samples_per_ray,
                                     &occ, &jr, rd.samples);
                }
                int n = int(rd.samples.size());
                rd.sigma.resize(n);
                rd.delta.resize(n);
                rd.weights.resize(n);
                rd.colors.resize(n);
                rd.geo_cache.resize(n);
                rd.app_cache.resize(n);
                rd.spec_cache.resize(n);
                rd.color_evaluated.assign(n, 0);
                w_samples[w] += n;

                for (int i = 0; i < n; ++i) {
                    rd.sigma[i] = geo.density_cached(rd.samples[i].x, rd.geo_cache[i]);
                    rd.delta[i] = rd.samples[i].delta;
                }
                // Weights are known before colors; colors with negligible
                // weight keep the background as a placeholder.
                double T = 1.0;
                for (int i = 0; i < n; ++i) {
                    double a = 1.0 - std::exp(-rd.sigma[i] * rd.delta[i]);
                    rd.weights[i] = T * a;
                    T *= 1.0 - a;
                    rd.colors[i] = bg;
                    if (rd.weights[i] > cfg.min_color_weight) {
                        Vec3 c_d, f_s;
                        app.eval_base(rd.samples[i].x, c_d, f_s, &rd.app_cache[i]);
                        rd.colors[i] = c_d;
                        if (!diffuse_only)
                            rd.colors[i] += app.eval_specular(f_s, rd.samples[i].x - rd.ray.origin,
                                                              &rd.spec_cache[i]);
                        rd.color_evaluated[i] = 1;
                        ++w_color[w];
                    }
                }
                QuadratureResult q =
                    composite_ray(rd.sigma.data(), rd.colors.data(), rd.delta.data(), n, bg);
                rd.pred = q.color;
            }
        });

        int64_t n_samples = 0, n_color = 0;
        for (int w = 0; w < workers; ++w) {
            n_samples += w_samples[w];
            n_color += w_color[w];
        }

        // Loss terms (render over rays; specular and entropy over samples).
        double render_sum = 0.0, spec_sum = 0.0, ent_sum = 0.0;
        for (int r = 0; r < n_rays; ++r) {
            const RayData& rd = rays[r];
            render_sum += norm2(rd.pred - rd.gt);
            for (size_t i = 0; i < rd.sigma.size(); ++i) {
                if (cfg.w_entropy > 0.0)
                    ent_sum += entropy_term(1.0 - std::exp(-rd.sigma[i] * rd.delta[i]));
                if (cfg.w_specular > 0.0 && !diffuse_only && rd.color_evaluated[i])
                    spec_sum += norm2(rd.spec_cache[i].c_s);
            }
        }
        double loss = render_sum / n_rays;
        if (cfg.w_specular > 0.0 && n_color > 0) loss += cfg.w_specular * spec_sum / n_color;
        if (cfg.w_entropy > 0.0 && n_samples > 0) loss += cfg.w_entropy * ent_sum / n_samples;

        // Backward over the cached forward state.
        parallel_chunks(n_rays, 0, [&](int w, int64_t r0, int64_t r1) {
            GeometryGrad& gg = geo_grads[w];
            AppearanceGrad& ag = app_grads[w];
            for (int64_t r = r0; r < r1; ++r) {
                RayData& rd = rays[r];
                int n = int(rd.sigma.size());
                if (n == 0) continue;
                rd.dsigma.resize(n);
                rd.dcolor.resize(n);
                Vec3 dC = (rd.pred - rd.gt) * (2.0 / n_rays);
                composite_ray_backward(rd.sigma.data(), rd.colors.data(), rd.delta.data(), n, bg,
                                       dC, 0.0, rd.dsigma.data(), rd.dcolor.data());
                for (int i = 0; i < n; ++i) {
                    if (cfg.w_entropy > 0.0 && n_samples > 0) {
                        double a = 1.0 - std::exp(-rd.sigma[i] * rd.delta[i]);
                        rd.dsigma[i] += cfg.w_entropy / double(n_samples) *
                                        entropy_term_grad(a) * rd.delta[i] * (1.0 - a);
                    }
                    geo.density_backward(rd.samples[i].x, rd.geo_cache[i], rd.dsigma[i], gg,
                                         nullptr);
                    if (!rd.color_evaluated[i]) continue;
                    Vec3 dc_d = rd.dcolor[i];
                    Vec3 df_s{0, 0, 0};
                    if (!diffuse_only) {
                        Vec3 dc_s = rd.dcolor[i];
                        if (cfg.w_specular > 0.0 && n_color > 0)
                            dc_s += rd.spec_cache[i].c_s * (2.0 * cfg.w_specular / n_color);
                        app.specular_backward(rd.spec_cache[i], dc_s, ag, &df_s, nullptr);
                    }
                    app.base_backward(rd.samples[i].x, rd.app_cache[i], dc_d, df_s, ag, nullptr);
                }
            }
        });

        for (int w = 1; w < workers; ++w) {
            geo_grads[0].add(geo_grads[w]);
            app_grads[0].add(app_grads[w]);
        }
        if (cfg.w_tv > 0.0) {
            GridGrad tv_grad = geo.grid.make_grad();
            double tv = loss_total_variation(geo.grid, &tv_grad);
            loss += cfg.w_tv * tv;
            for (size_t l = 0; l < tv_grad.values.size(); ++l)
                for (size_t i = 0; i < tv_grad.values[l].size(); ++i)
                    geo_grads[0].grid.values[l][i] += cfg.w_tv * tv_grad.values[l][i];
        }

        if (!std::isfinite(loss))
            throw RuntimeFailure("stage1: non-finite loss at step " + std::to_string(step));

        for (ParamGroup& g : groups)
            adam_step(*g.p, *g.g, g.state, lr, cfg.adam_beta1, cfg.adam_beta2, g.eps);
        for (int w = 0; w < workers; ++w) {
            geo_grads[w].zero();
            app_grads[w].zero();
        }

        if ((step + 1) % cfg.occ_interval == 0) occ.update(geo, occ_seed);

        double mean_samples = n_rays > 0 ? double(n_samples) / n_rays : 0.0;
        ema_samples = 0.9 * ema_samples + 0.1 * std::max(1.0, mean_samples);
        report.total_rays += n_rays;
        report.total_samples += n_samples;
        report.final_loss = loss;

        if (step % cfg.log_interval == 0 || step + 1 == cfg.steps)
            logf("step %6d  loss %.6e  lr %.3e  rays %6d  samples/ray %5.1f  occ %.3f",
                 step, loss, lr, n_rays, mean_samples, occ.occupied_fraction());
    }

    // Final quality on the training views.
    double psnr_sum = 0.0;
    for (int id : train_ids) {
        const PosedImage& im = ds.images[id];
        Image r = render_view(geo, app, &occ, im.camera, domain, bg, cfg.max_samples_per_ray);
        psnr_sum += psnr(r, im.pixels);
    }
    report.final_train_psnr = psnr_sum / double(train_ids.size());
    logf("stage1 done: loss %.6e  train psnr %.2f dB", report.final_loss,
         report.final_train_psnr);
    return report;
}

}  // namespace rfmesh
