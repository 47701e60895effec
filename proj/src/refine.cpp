#include "rfmesh/refine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>

#include "rfmesh/adam.hpp"
#include "rfmesh/errors.hpp"
#include "rfmesh/mesh_losses.hpp"
#include "rfmesh/metrics.hpp"
#include "rfmesh/remesh.hpp"
#include "rfmesh/rng.hpp"
#include "rfmesh/subdivide.hpp"
#include "rfmesh/train_stage1.hpp"

namespace rfmesh {

void accumulate_face_errors(const FragmentBuffer& frag,
                            const std::vector<double>& per_pixel_error,
                            FaceErrorAccumulator& acc) {
    if (per_pixel_error.size() != frag.frags.size())
        throw RuntimeFailure("accumulate_face_errors: error image does not match the buffer");
    for (size_t i = 0; i < frag.frags.size(); ++i) {
        int f = frag.frags[i].face;
        if (f < 0) continue;
        if (f >= int(acc.faces()))
            throw RuntimeFailure("accumulate_face_errors: face beyond the accumulator");
        acc.sum[f] += per_pixel_error[i];
        acc.count[f] += 1;
    }
}

double percentile_nearest_rank(std::vector<double> values, double p) {
    if (values.empty()) throw RuntimeFailure("percentile of an empty list");
    if (!(p > 0.0) || p > 100.0) throw RuntimeFailure("percentile rank out of (0, 100]");
    std::sort(values.begin(), values.end());
    // Integer percentiles of integer-size lists divide exactly in IEEE
    // arithmetic, so the ceiling needs no epsilon guard.
    auto rank = int64_t(std::ceil(p * double(values.size()) / 100.0));
    rank = std::clamp<int64_t>(rank, 1, int64_t(values.size()));
    return values[size_t(rank - 1)];
}

ErrorThresholds compute_thresholds(const FaceErrorAccumulator& acc) {
    std::vector<double> means;
    means.reserve(acc.faces());
    for (size_t f = 0; f < acc.faces(); ++f)
        if (acc.observed(int(f))) means.push_back(acc.mean(int(f)));
    ErrorThresholds th;
    th.observed = int(means.size());
    if (means.empty()) return th;
    th.subdivide = percentile_nearest_rank(means, 95.0);
    th.decimate = percentile_nearest_rank(means, 50.0);
    return th;
}

std::string RefineRound::to_string() const {
    char buf[256];
    if (skipped) {
        std::snprintf(buf, sizeof(buf),
                      "refine @ step %d: skipped, no faces observed since the last reset", step);
        return buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "refine @ step %d: faces %d -> %d, subdivided %d, remesh candidates %d, "
                  "e_sub %.6e, e_dec %.6e, observed %d",
                  step, faces_before, faces_after, subdivided, decimate_candidates, e_subdivide,
                  e_decimate, observed);
    return buf;
}

RefineRound refine_topology(TriMesh& mesh, FaceErrorAccumulator& acc, const Stage2Config& cfg) {
    if (acc.faces() != mesh.faces.size())
        throw RuntimeFailure("refine: accumulator tracks " + std::to_string(acc.faces()) +
                             " faces, mesh has " + std::to_string(mesh.faces.size()));
    RefineRound round;
    round.faces_before = int(mesh.faces.size());

    ErrorThresholds th = compute_thresholds(acc);
    round.observed = th.observed;

    // Deformation becomes permanent geometry each round either way; the
    // effective surface is unchanged by the fold.
    mesh.fold_offsets();
    mesh.ensure_offsets();

    if (th.observed == 0) {
        round.skipped = true;
        round.faces_after = round.faces_before;
        acc.reset(mesh.faces.size());
        return round;
    }
    round.e_subdivide = th.subdivide;
    round.e_decimate = th.decimate;

    double diag = mesh_bounds(mesh).diagonal();
    double min_edge = cfg.min_edge_frac * diag;
    double target_edge = cfg.target_edge_frac * diag;
    AABB center = AABB::cube(cfg.center_bound);
    auto in_center = [&](int f) { return center.contains(face_centroid(mesh, f)); };

    // Selection runs on the pre-edit face ids. Subdivision wants strictly
    // hotter than the upper threshold; decimation draws from strictly cooler
    // than the lower one (never-rendered faces rank as zero error), keeping
    // the two sets disjoint even when the thresholds coincide.
    std::vector<int> hot;
    std::vector<std::pair<double, int>> cool;
    for (int f = 0; f < round.faces_before; ++f) {
        if (!in_center(f)) continue;
        double e = acc.mean(f);
        if (e > th.subdivide) hot.push_back(f);
        else if (e < th.decimate) cool.emplace_back(e, f);
    }
    std::sort(cool.begin(), cool.end());
    size_t want = size_t(cfg.decimate_fraction * double(round.faces_before));
    if (cool.size() > want) cool.resize(want);

    SubdivideResult sub = midpoint_subdivide(mesh, hot, min_edge);
    round.subdivided = sub.faces_subdivided;

    std::vector<char> cool_mark(round.faces_before, 0);
    for (const auto& [e, f] : cool) cool_mark[f] = 1;
    std::vector<int> region;
    for (size_t nf = 0; nf < mesh.faces.size(); ++nf)
        if (cool_mark[sub.parent[nf]]) region.push_back(int(nf));
    round.decimate_candidates = int(region.size());
    if (!region.empty()) remesh_region(mesh, region, target_edge);

    mesh.offsets.assign(mesh.vertices.size(), Vec3{});
    acc.reset(mesh.faces.size());
    round.faces_after = int(mesh.faces.size());

    MeshAudit a = audit_mesh(mesh);
    if (!a.sound())
        throw RuntimeFailure("refine: structural audit failed after the topology edit\n" +
                             a.to_string());
    return round;
}

namespace {

struct ParamGroup {
    std::vector<double>* p;
    std::vector<double>* g;
    double eps;
    AdamState state;
};

std::vector<ParamGroup> appearance_groups(AppearanceField& app, AppearanceGrad& agrad,
                                          double eps_grid, double eps_mlp) {
    std::vector<ParamGroup> groups;
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

Stage2Report train_stage2(const Dataset& ds, const Stage2Config& cfg, uint64_t seed,
                          TriMesh& mesh, AppearanceField& app, std::FILE* log) {
    if (cfg.steps < 0) throw InputError("stage2: negative step count");
    if (cfg.decimate_fraction < 0.0 || cfg.decimate_fraction >= 1.0)
        throw InputError("stage2: decimate fraction must lie in [0, 1)");
    for (size_t i = 0; i < cfg.refine_fractions.size(); ++i) {
        double f = cfg.refine_fractions[i];
        if (!(f > 0.0 && f < 1.0))
            throw InputError("stage2: refine fractions must lie in (0, 1)");
        if (i > 0 && !(f > cfg.refine_fractions[i - 1]))
            throw InputError("stage2: refine fractions must be strictly increasing");
    }

    Stage2Report report;
    if (cfg.steps == 0) return report;

    std::vector<int> train_ids = ds.split_indices(Split::train);
    if (train_ids.empty()) throw InputError("stage2: dataset has no training views");

    mesh.ensure_offsets();
    FaceErrorAccumulator acc;
    acc.reset(mesh.faces.size());

    // Gradient storage is pre-shaped so the Adam groups can bind to stable
    // vectors; shade_backward reuses matching shapes.
    AppearanceGrad agrad;
    agrad.grid = app.grid.make_grad();
    agrad.mlp1 = app.mlp1.make_grad();
    agrad.mlp2 = app.mlp2.make_grad();
    std::vector<ParamGroup> groups =
        appearance_groups(app, agrad, cfg.adam_eps_grid, cfg.adam_eps_mlp);

    // Per-vertex state, rebuilt from scratch whenever topology changes.
    std::vector<double> vert_params, vert_grad;
    AdamState vert_state;
    std::vector<std::vector<int>> neighbors;
    std::vector<char> vert_frozen;  // outside the center region: no offsets
    AABB center = AABB::cube(cfg.center_bound);
    auto rebuild_vertex_state = [&] {
        size_t n = mesh.vertices.size();
        vert_params.assign(n * 3, 0.0);
        for (size_t i = 0; i < n; ++i)
            for (int a = 0; a < 3; ++a) vert_params[i * 3 + a] = mesh.offsets[i][a];
        vert_grad.assign(n * 3, 0.0);
        vert_state = AdamState{};
        neighbors = vertex_neighbors(mesh);
        vert_frozen.assign(n, 0);
        for (size_t i = 0; i < n; ++i)
            if (!center.contains(mesh.vertices[i])) vert_frozen[i] = 1;
    };
    rebuild_vertex_state();

    // One topology update per fraction, after floor(f * steps) completed
    // steps; ties with the same trigger index all fire there.
    std::vector<int> triggers;
    for (double f : cfg.refine_fractions) triggers.push_back(int(std::floor(f * cfg.steps)));
    size_t next_trigger = 0;

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

    auto run_rounds = [&](int completed) {
        while (next_trigger < triggers.size() && triggers[next_trigger] == completed) {
            RefineRound round = refine_topology(mesh, acc, cfg);
            round.step = completed;
            logf("%s", round.to_string().c_str());
            report.rounds.push_back(round);
            rebuild_vertex_state();
            ++next_trigger;
        }
    };

    Rng draw_rng(splitmix64(seed ^ 0x57a6e2ULL));
    std::vector<Vec3> dvertex, lap_grad, off_grad;
    std::vector<double> pixel_err;
    run_rounds(0);

    for (int step = 0; step < cfg.steps; ++step) {
        const PosedImage& im = ds.images[train_ids[draw_rng.uniform_int(train_ids.size())]];
        FragmentBuffer frag = rasterize(mesh, im.camera);
        Image pred = shade(frag, app, im.camera, ds.background, false);

        // Mean squared color error over every pixel; uncovered pixels compare
        // the dataset background against the reference and carry no gradient.
        size_t pixels = pred.pixel_count();
        pixel_err.assign(pixels, 0.0);
        Image dimage(pred.width, pred.height);
        double render_sum = 0.0;
        for (size_t i = 0; i < pixels; ++i) {
            Vec3 d = pred.at_index(i) - im.pixels.at_index(i);
            pixel_err[i] = norm2(d);
            render_sum += pixel_err[i];
            dimage.set_index(i, d * (2.0 / double(pixels)));
        }
        double l_render = render_sum / double(pixels);
        accumulate_face_errors(frag, pixel_err, acc);

        shade_backward(frag, dimage, mesh, app, im.camera, false, agrad, dvertex);

        double l_smooth = cfg.w_smooth > 0.0 ? laplacian_loss(mesh, neighbors, &lap_grad) : 0.0;
        double l_offset = cfg.w_offset > 0.0 ? offset_loss(mesh, &off_grad) : 0.0;
        double loss = l_render + cfg.w_smooth * l_smooth + cfg.w_offset * l_offset;
        if (!std::isfinite(loss))
            throw RuntimeFailure("stage2: non-finite loss at step " + std::to_string(step) +
                                 " (render " + std::to_string(l_render) + ", smooth " +
                                 std::to_string(l_smooth) + ", offset " +
                                 std::to_string(l_offset) + ")");

        for (size_t i = 0; i < mesh.vertices.size(); ++i) {
            Vec3 g = dvertex[i];
            if (cfg.w_smooth > 0.0) g += lap_grad[i] * cfg.w_smooth;
            if (cfg.w_offset > 0.0) g += off_grad[i] * cfg.w_offset;
            if (vert_frozen[i]) g = Vec3{};
            for (int a = 0; a < 3; ++a) vert_grad[i * 3 + a] = g[a];
        }
        adam_step(vert_params, vert_grad, vert_state, cfg.vertex_lr, cfg.adam_beta1,
                  cfg.adam_beta2, cfg.adam_eps_vertex);
        for (size_t i = 0; i < mesh.vertices.size(); ++i)
            for (int a = 0; a < 3; ++a) mesh.offsets[i][a] = vert_params[i * 3 + a];

        double lr_app =
            lr_schedule(cfg.appearance_lr_start, cfg.appearance_lr_final, step, cfg.steps);
        for (ParamGroup& g : groups)
            adam_step(*g.p, *g.g, g.state, lr_app, cfg.adam_beta1, cfg.adam_beta2, g.eps);

        report.final_loss = loss;
        if (step % cfg.log_interval == 0 || step + 1 == cfg.steps)
            logf("step %6d  loss %.6e  render %.6e  smooth %.3e  offset %.3e  lr_app %.3e  "
                 "faces %zu",
                 step, loss, l_render, l_smooth, l_offset, lr_app, mesh.faces.size());

        run_rounds(step + 1);
    }

    double psnr_sum = 0.0;
    for (int id : train_ids) {
        const PosedImage& im = ds.images[id];
        FragmentBuffer frag = rasterize(mesh, im.camera);
        psnr_sum += psnr(shade(frag, app, im.camera, ds.background, false), im.pixels);
    }
    report.final_train_psnr = psnr_sum / double(train_ids.size());
    logf("stage2 done: loss %.6e  train psnr %.2f dB  faces %zu", report.final_loss,
         report.final_train_psnr, mesh.faces.size());
    return report;
}

}  // namespace rfmesh
