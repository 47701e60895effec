// Error-driven refinement: per-face error accounting, nearest-rank
// percentiles, topology updates, and the stage-2 training loop.

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "rfmesh/errors.hpp"
#include "rfmesh/refine.hpp"
#include "rfmesh/rng.hpp"
#include "rfmesh/subdivide.hpp"
#include "rfmesh/synthetic.hpp"

using namespace rfmesh;

namespace {

FieldConfig small_config() {
    FieldConfig cfg;
    cfg.levels = 4;
    cfg.base_res = 4;
    cfg.geo_max_res = 16;
    cfg.app_max_res = 16;
    cfg.geo_hidden = 16;
    cfg.app_hidden = 16;
    cfg.spec_hidden = 16;
    return cfg;
}

// Icosphere: unit icosahedron subdivided `levels` times, vertices projected
// back onto the unit sphere. 20 * 4^levels faces.
TriMesh make_icosphere(int levels) {
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    TriMesh m;
    m.vertices = {{-1, phi, 0}, {1, phi, 0},   {-1, -phi, 0}, {1, -phi, 0},
                  {0, -1, phi}, {0, 1, phi},   {0, -1, -phi}, {0, 1, -phi},
                  {phi, 0, -1}, {phi, 0, 1},   {-phi, 0, -1}, {-phi, 0, 1}};
    for (Vec3& v : m.vertices) v = normalize(v);
    m.faces = {{0, 11, 5},  {0, 5, 1},   {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
               {1, 5, 9},   {5, 11, 4},  {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
               {3, 9, 4},   {3, 4, 2},   {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
               {4, 9, 5},   {2, 4, 11},  {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (int l = 0; l < levels; ++l) {
        std::vector<int> all(m.faces.size());
        for (size_t f = 0; f < m.faces.size(); ++f) all[f] = static_cast<int>(f);
        midpoint_subdivide(m, all, 0.0);
        for (Vec3& v : m.vertices) v = normalize(v);
    }
    return m;
}

// w x h quad grid spanning [-1,1]^2 in the z = 0 plane, two triangles per
// quad, face ids row-major: quad (i, j) owns faces 2*(j*w+i) and 2*(j*w+i)+1.
TriMesh make_grid_patch(int w, int h) {
    TriMesh m;
    for (int j = 0; j <= h; ++j)
        for (int i = 0; i <= w; ++i)
            m.vertices.push_back({2.0 * i / w - 1.0, 2.0 * j / h - 1.0, 0.0});
    auto vid = [&](int i, int j) { return j * (w + 1) + i; };
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < w; ++i) {
            m.faces.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
            m.faces.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
        }
    return m;
}

FragmentBuffer uniform_buffer(int w, int h, int face) {
    FragmentBuffer buf;
    buf.width = w;
    buf.height = h;
    buf.frags.assign(size_t(w) * h, Fragment{});
    for (Fragment& f : buf.frags) f.face = face;
    return buf;
}

// The standard scenario: one hot face, a block of never-rendered faces, and
// low uniform error everywhere else.
FaceErrorAccumulator patch_errors(int faces, int hot_face, int unobserved_until) {
    FaceErrorAccumulator acc;
    acc.reset(faces);
    for (int f = 0; f < faces; ++f) {
        if (f < unobserved_until) continue;  // count stays 0
        double e = f == hot_face ? 1.0 : 0.01;
        acc.sum[f] = 5.0 * e;
        acc.count[f] = 5;
    }
    return acc;
}

// Independent percentile oracle: smallest listed value v such that the count
// of elements <= v reaches p percent of the list.
double percentile_by_counting(std::vector<double> vals, double p) {
    std::sort(vals.begin(), vals.end());
    double need = p * double(vals.size()) / 100.0;
    for (double v : vals) {
        int cnt = 0;
        for (double u : vals)
            if (u <= v) ++cnt;
        if (double(cnt) >= need) return v;
    }
    return vals.back();
}

bool in_triangle_2d(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    double w0 = cross2({b.x - a.x, b.y - a.y}, {p.x - a.x, p.y - a.y});
    double w1 = cross2({c.x - b.x, c.y - b.y}, {p.x - b.x, p.y - b.y});
    double w2 = cross2({a.x - c.x, a.y - c.y}, {p.x - c.x, p.y - c.y});
    return (w0 >= 0 && w1 >= 0 && w2 >= 0) || (w0 <= 0 && w1 <= 0 && w2 <= 0);
}

}  // namespace

TEST_CASE("accumulate_face_errors: totals, means, misuse") {
    FaceErrorAccumulator acc;
    acc.reset(3);

    FragmentBuffer empty = uniform_buffer(4, 4, -1);
    accumulate_face_errors(empty, std::vector<double>(16, 9.0), acc);
    for (int f = 0; f < 3; ++f) {
        CHECK(acc.count[f] == 0);
        CHECK(acc.sum[f] == 0.0);
        CHECK(acc.mean(f) == 0.0);
        CHECK(!acc.observed(f));
    }

    FragmentBuffer ten = uniform_buffer(5, 2, 1);
    accumulate_face_errors(ten, std::vector<double>(10, 0.04), acc);
    CHECK(acc.count[1] == 10);
    CHECK(acc.mean(1) == doctest::Approx(0.04).epsilon(1e-12));
    CHECK(acc.count[0] == 0);

    CHECK_THROWS_AS(accumulate_face_errors(ten, std::vector<double>(9, 0.0), acc),
                    RuntimeFailure);
    FragmentBuffer wild = uniform_buffer(2, 2, 7);  // face beyond the accumulator
    CHECK_THROWS_AS(accumulate_face_errors(wild, std::vector<double>(4, 0.0), acc),
                    RuntimeFailure);
}

TEST_CASE("accumulate_face_errors: image order does not matter") {
    // Dyadic per-pixel errors make the per-face sums exact, so any order of
    // the same pixels must give bitwise-identical accumulators.
    FragmentBuffer a = uniform_buffer(3, 3, 0);
    a.frags[4].face = 2;
    FragmentBuffer b = uniform_buffer(2, 2, 2);
    FragmentBuffer c = uniform_buffer(4, 1, 1);
    c.frags[3].face = 0;
    std::vector<double> ea(9, 0.25), eb(4, 0.5), ec(4, 0.125);

    FaceErrorAccumulator first, second;
    first.reset(3);
    second.reset(3);
    accumulate_face_errors(a, ea, first);
    accumulate_face_errors(b, eb, first);
    accumulate_face_errors(c, ec, first);
    accumulate_face_errors(c, ec, second);
    accumulate_face_errors(a, ea, second);
    accumulate_face_errors(b, eb, second);
    for (int f = 0; f < 3; ++f) {
        CHECK(first.sum[f] == second.sum[f]);
        CHECK(first.count[f] == second.count[f]);
    }
    CHECK(first.count[0] == 9);  // 8 from a, 1 from c
    CHECK(first.count[1] == 3);
    CHECK(first.count[2] == 5);
}

TEST_CASE("percentile_nearest_rank: pinned values and misuse") {
    std::vector<double> ascending(100);
    for (int i = 0; i < 100; ++i) ascending[i] = double(i + 1);
    CHECK(percentile_nearest_rank(ascending, 95.0) == 95.0);
    CHECK(percentile_nearest_rank(ascending, 50.0) == 50.0);
    CHECK(percentile_nearest_rank(ascending, 100.0) == 100.0);
    CHECK(percentile_nearest_rank(ascending, 1.0) == 1.0);
    CHECK(percentile_nearest_rank({7.5}, 95.0) == 7.5);
    CHECK(percentile_nearest_rank({7.5}, 50.0) == 7.5);
    CHECK(percentile_nearest_rank({3.0, 1.0}, 50.0) == 1.0);
    CHECK_THROWS_AS(percentile_nearest_rank({}, 50.0), RuntimeFailure);
    CHECK_THROWS_AS(percentile_nearest_rank({1.0}, 0.0), RuntimeFailure);
    CHECK_THROWS_AS(percentile_nearest_rank({1.0}, 101.0), RuntimeFailure);
}

TEST_CASE("percentile_nearest_rank: counting oracle, lengths 1 to 200") {
    Rng rng(404);
    for (int n = 1; n <= 200; ++n) {
        std::vector<double> vals(n);
        // Quantized draws force ties.
        for (double& v : vals) v = double(rng.uniform_int(12)) * 0.375;
        for (double p : {95.0, 50.0, 25.0, 100.0, 7.0})
            CHECK(percentile_nearest_rank(vals, p) == percentile_by_counting(vals, p));
    }
}

TEST_CASE("compute_thresholds: observed faces only") {
    FaceErrorAccumulator acc;
    acc.reset(200);
    for (int f = 0; f < 100; ++f) {
        acc.sum[f] = double(f + 1) * 2.0;  // mean f+1 over 2 pixels
        acc.count[f] = 2;
    }
    ErrorThresholds th = compute_thresholds(acc);
    CHECK(th.observed == 100);
    CHECK(th.subdivide == 95.0);
    CHECK(th.decimate == 50.0);

    FaceErrorAccumulator even;
    even.reset(10);
    for (int f = 0; f < 10; ++f) {
        even.sum[f] = 0.125 * 3;
        even.count[f] = 3;
    }
    th = compute_thresholds(even);
    CHECK(th.subdivide == 0.125);
    CHECK(th.decimate == 0.125);

    FaceErrorAccumulator single;
    single.reset(5);
    single.sum[3] = 0.75;
    single.count[3] = 1;
    th = compute_thresholds(single);
    CHECK(th.observed == 1);
    CHECK(th.subdivide == 0.75);
    CHECK(th.decimate == 0.75);

    FaceErrorAccumulator none;
    none.reset(5);
    CHECK(compute_thresholds(none).observed == 0);
}

TEST_CASE("refine_topology: hot face splits into four children") {
    TriMesh m = make_grid_patch(8, 8);
    REQUIRE(m.faces.size() == 128);
    const int hot = 70;
    Vec3 ha = m.vertices[m.faces[hot][0]];
    Vec3 hb = m.vertices[m.faces[hot][1]];
    Vec3 hc = m.vertices[m.faces[hot][2]];
    double hot_area = face_area(m, hot);

    FaceErrorAccumulator acc = patch_errors(128, hot, 20);
    Stage2Config cfg;
    cfg.decimate_fraction = 0.0;  // isolate the subdivision path
    RefineRound round = refine_topology(m, acc, cfg);

    CHECK(!round.skipped);
    CHECK(round.observed == 108);
    CHECK(round.e_subdivide == 0.01);
    CHECK(round.e_decimate == 0.01);
    CHECK(round.subdivided == 1);
    CHECK(round.decimate_candidates == 0);
    // +3 children beyond the hot face, +3 from crack-free neighbor splits.
    CHECK(round.faces_after == 134);
    CHECK(int(m.faces.size()) == round.faces_after);

    int children = 0;
    double child_area = 0.0;
    for (size_t f = 0; f < m.faces.size(); ++f) {
        if (in_triangle_2d(face_centroid(m, int(f)), ha, hb, hc)) {
            ++children;
            child_area += face_area(m, int(f));
        }
    }
    CHECK(children == 4);
    CHECK(child_area == doctest::Approx(hot_area).epsilon(1e-12));

    // Post-round state: offsets and accumulator reset for the new topology.
    REQUIRE(m.offsets.size() == m.vertices.size());
    for (const Vec3& o : m.offsets) CHECK(o == Vec3{});
    REQUIRE(acc.faces() == m.faces.size());
    for (size_t f = 0; f < acc.faces(); ++f) {
        CHECK(acc.sum[f] == 0.0);
        CHECK(acc.count[f] == 0);
    }
    CHECK(audit_mesh(m).sound());
}

TEST_CASE("refine_topology: low-error faces are merged away") {
    TriMesh m = make_grid_patch(8, 8);
    const int hot = 70;
    FaceErrorAccumulator acc = patch_errors(128, hot, 20);
    Stage2Config cfg;
    cfg.target_edge_frac = 0.3;  // well above the patch edge length: merges
    RefineRound round = refine_topology(m, acc, cfg);

    CHECK(!round.skipped);
    CHECK(round.subdivided == 1);
    // floor(0.10 * 128) of the never-rendered faces, lowest ids first.
    CHECK(round.decimate_candidates == 12);
    // Merging must beat the +6 faces subdivision added.
    CHECK(round.faces_after < 134);
    CHECK(audit_mesh(m).sound());

    // Offsets fold into base positions before any edit: a pure-z lift of the
    // whole patch must survive in the effective geometry.
    TriMesh lifted = make_grid_patch(8, 8);
    lifted.ensure_offsets();
    for (Vec3& o : lifted.offsets) o = {0, 0, 0.25};
    FaceErrorAccumulator acc2 = patch_errors(128, hot, 20);
    refine_topology(lifted, acc2, cfg);
    for (size_t v = 0; v < lifted.vertices.size(); ++v) {
        CHECK(lifted.vertices[v].z == 0.25);
        CHECK(lifted.offsets[v] == Vec3{});
    }
}

TEST_CASE("refine_topology: empty accumulator is a geometric no-op") {
    TriMesh m = make_grid_patch(4, 4);
    m.ensure_offsets();
    for (size_t v = 0; v < m.vertices.size(); ++v) m.offsets[v] = {0, 0, 0.125 * (v % 3)};
    std::vector<Vec3> effective(m.vertices.size());
    for (size_t v = 0; v < m.vertices.size(); ++v) effective[v] = m.position(int(v));
    auto faces = m.faces;

    FaceErrorAccumulator acc;
    acc.reset(m.faces.size());
    Stage2Config cfg;
    RefineRound round = refine_topology(m, acc, cfg);
    CHECK(round.skipped);
    CHECK(round.faces_before == round.faces_after);
    CHECK(m.faces == faces);
    for (size_t v = 0; v < m.vertices.size(); ++v) {
        CHECK(m.position(int(v)) == effective[v]);
        CHECK(m.offsets[v] == Vec3{});  // deformation folded, not discarded
    }

    FaceErrorAccumulator wrong;
    wrong.reset(3);
    CHECK_THROWS_AS(refine_topology(m, wrong, cfg), RuntimeFailure);
}

TEST_CASE("refine_topology: faces outside the center region are left alone") {
    // Patch spanning x in [-1, 3]: half the faces sit outside the unit box.
    TriMesh m = make_grid_patch(8, 8);
    for (Vec3& v : m.vertices) v.x = (v.x + 1.0) * 2.0 - 1.0;
    int inside_hot = -1, outside_hot = -1;
    for (int f = 0; f < int(m.faces.size()); ++f) {
        double cx = face_centroid(m, f).x;
        if (inside_hot < 0 && cx > -0.5 && cx < 0.5) inside_hot = f;
        if (outside_hot < 0 && cx > 1.5) outside_hot = f;
    }
    REQUIRE(inside_hot >= 0);
    REQUIRE(outside_hot >= 0);

    FaceErrorAccumulator acc;
    acc.reset(m.faces.size());
    for (int f = 0; f < int(m.faces.size()); ++f) {
        double e = (f == inside_hot || f == outside_hot) ? 1.0 : 0.01;
        acc.sum[f] = e;
        acc.count[f] = 1;
    }
    Stage2Config cfg;
    cfg.decimate_fraction = 0.0;
    RefineRound round = refine_topology(m, acc, cfg);
    // Both faces are above the threshold, only the inside one splits.
    CHECK(round.subdivided == 1);
    CHECK(audit_mesh(m).sound());
}

TEST_CASE("refine_topology: uniform errors change nothing") {
    TriMesh m = make_grid_patch(6, 6);
    auto faces = m.faces;
    FaceErrorAccumulator acc;
    acc.reset(m.faces.size());
    for (size_t f = 0; f < acc.faces(); ++f) {
        acc.sum[f] = 0.5;
        acc.count[f] = 2;
    }
    Stage2Config cfg;
    RefineRound round = refine_topology(m, acc, cfg);
    CHECK(!round.skipped);
    CHECK(round.e_subdivide == 0.25);
    CHECK(round.e_decimate == 0.25);
    CHECK(round.subdivided == 0);
    CHECK(round.decimate_candidates == 0);
    CHECK(m.faces == faces);
}

TEST_CASE("train_stage2: schedule, determinism, zero steps") {
    SyntheticScene scene;
    scene.gloss = 0.0;
    SyntheticConfig scfg;
    scfg.n_train = 6;
    scfg.n_test = 1;
    scfg.resolution = 32;
    Dataset ds = generate_synthetic_dataset(scene, scfg, 11);

    TriMesh base = make_icosphere(2);
    for (Vec3& v : base.vertices) v = v * scene.radius;
    Rng app_rng(5);
    AppearanceField app0 = AppearanceField::make(small_config(), AABB::cube(1.0), app_rng);

    Stage2Config cfg;
    cfg.steps = 20;
    cfg.target_edge_frac = 0.08;  // near the icosphere edge: mild topology churn
    cfg.log_interval = 50;

    TriMesh mesh1 = base;
    AppearanceField app1 = app0;
    Stage2Report r1 = train_stage2(ds, cfg, 99, mesh1, app1, nullptr);

    REQUIRE(r1.rounds.size() == 6);
    int expected[6] = {2, 4, 6, 8, 10, 14};  // floor(f * 20)
    for (int i = 0; i < 6; ++i) {
        CHECK(r1.rounds[i].step == expected[i]);
        CHECK(!r1.rounds[i].skipped);
    }
    CHECK(std::isfinite(r1.final_loss));
    CHECK(r1.final_train_psnr > 0.0);
    CHECK(audit_mesh(mesh1).sound());

    // Bitwise repeatability for a fixed seed.
    TriMesh mesh2 = base;
    AppearanceField app2 = app0;
    Stage2Report r2 = train_stage2(ds, cfg, 99, mesh2, app2, nullptr);
    CHECK(r1.final_loss == r2.final_loss);
    REQUIRE(mesh1.vertices.size() == mesh2.vertices.size());
    CHECK(mesh1.faces == mesh2.faces);
    for (size_t v = 0; v < mesh1.vertices.size(); ++v) {
        CHECK(mesh1.vertices[v] == mesh2.vertices[v]);
        CHECK(mesh1.offsets[v] == mesh2.offsets[v]);
    }
    for (int l = 0; l < app1.grid.levels; ++l) CHECK(app1.grid.values[l] == app2.grid.values[l]);

    // Zero steps change nothing.
    TriMesh mesh3 = base;
    AppearanceField app3 = app0;
    Stage2Config zero = cfg;
    zero.steps = 0;
    Stage2Report r3 = train_stage2(ds, zero, 99, mesh3, app3, nullptr);
    CHECK(r3.rounds.empty());
    CHECK(mesh3.faces == base.faces);
    for (size_t v = 0; v < mesh3.vertices.size(); ++v)
        CHECK(mesh3.vertices[v] == base.vertices[v]);
    for (int l = 0; l < app3.grid.levels; ++l) CHECK(app3.grid.values[l] == app0.grid.values[l]);
}

TEST_CASE("train_stage2: colliding trigger indices each fire once") {
    SyntheticScene scene;
    scene.gloss = 0.0;
    SyntheticConfig scfg;
    scfg.n_train = 3;
    scfg.n_test = 1;
    scfg.resolution = 24;
    Dataset ds = generate_synthetic_dataset(scene, scfg, 12);

    TriMesh mesh = make_icosphere(1);
    for (Vec3& v : mesh.vertices) v = v * scene.radius;
    Rng app_rng(6);
    AppearanceField app = AppearanceField::make(small_config(), AABB::cube(1.0), app_rng);

    Stage2Config cfg;
    cfg.steps = 5;  // floor(f * 5) = {0, 1, 1, 2, 2, 3}
    cfg.log_interval = 50;
    Stage2Report r = train_stage2(ds, cfg, 7, mesh, app, nullptr);

    REQUIRE(r.rounds.size() == 6);
    int expected[6] = {0, 1, 1, 2, 2, 3};
    for (int i = 0; i < 6; ++i) CHECK(r.rounds[i].step == expected[i]);
    CHECK(r.rounds[0].skipped);   // fires before any accumulation
    CHECK(!r.rounds[1].skipped);
    CHECK(r.rounds[2].skipped);   // same index as the previous round: acc reset
    CHECK(!r.rounds[3].skipped);
    CHECK(r.rounds[4].skipped);
    CHECK(!r.rounds[5].skipped);
    CHECK(audit_mesh(mesh).sound());
}

TEST_CASE("train_stage2: configuration misuse is rejected") {
    Dataset ds;  // never touched: validation precedes the data
    TriMesh mesh = make_icosphere(0);
    Rng rng(1);
    AppearanceField app = AppearanceField::make(small_config(), AABB::cube(1.0), rng);

    Stage2Config bad;
    bad.steps = -1;
    CHECK_THROWS_AS(train_stage2(ds, bad, 0, mesh, app, nullptr), InputError);

    bad = Stage2Config{};
    bad.refine_fractions = {0.2, 0.2, 0.5};
    CHECK_THROWS_AS(train_stage2(ds, bad, 0, mesh, app, nullptr), InputError);

    bad = Stage2Config{};
    bad.refine_fractions = {0.5, 1.0};
    CHECK_THROWS_AS(train_stage2(ds, bad, 0, mesh, app, nullptr), InputError);

    bad = Stage2Config{};
    bad.decimate_fraction = 1.0;
    CHECK_THROWS_AS(train_stage2(ds, bad, 0, mesh, app, nullptr), InputError);

    Stage2Config ok;
    ok.steps = 1;
    CHECK_THROWS_AS(train_stage2(ds, ok, 0, mesh, app, nullptr), InputError);  // no views
}

TEST_CASE("train_stage2: rendering loss decreases on a fresh appearance field") {
    SyntheticScene scene;
    scene.gloss = 0.0;
    SyntheticConfig scfg;
    scfg.n_train = 4;
    scfg.n_test = 1;
    scfg.resolution = 24;
    Dataset ds = generate_synthetic_dataset(scene, scfg, 21);

    TriMesh mesh = make_icosphere(2);
    for (Vec3& v : mesh.vertices) v = v * scene.radius;
    Rng rng(9);
    AppearanceField app = AppearanceField::make(small_config(), AABB::cube(1.0), rng);

    Stage2Config cfg;
    cfg.steps = 60;
    cfg.refine_fractions = {};           // isolate the optimization
    cfg.appearance_lr_start = 1e-2;      // fresh field: use the fast end of the schedule
    cfg.appearance_lr_final = 1e-2;
    cfg.log_interval = 1000;

    TriMesh before = mesh;
    AppearanceField app_before = app;
    // Loss of the very first step equals the pre-training rendering error.
    Stage2Config probe = cfg;
    probe.steps = 1;
    TriMesh pm = mesh;
    AppearanceField pa = app;
    Stage2Report first = train_stage2(ds, probe, 31, pm, pa, nullptr);

    Stage2Report full = train_stage2(ds, cfg, 31, mesh, app, nullptr);
    CHECK(full.final_loss < first.final_loss * 0.5);
    CHECK(full.final_train_psnr > 10.0);
}
