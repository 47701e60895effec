#include <doctest.h>

#include "rfmesh/errors.hpp"
#include "rfmesh/metrics.hpp"
#include "rfmesh/occupancy.hpp"
#include "rfmesh/parallel.hpp"
#include "rfmesh/synthetic.hpp"
#include "rfmesh/train_stage1.hpp"
#include "rfmesh/volrender.hpp"
#include "test_support.hpp"

using namespace rfmesh;
using namespace rfmesh_test;

TEST_CASE("stratified sampling centers and deltas match the worked example") {
    Ray r{{0, 0, 0}, {1, 0, 0}};
    std::vector<RaySample> s;
    int n = sample_along_ray(r, 0.0, 4.0, 4, nullptr, nullptr, s);
    REQUIRE(n == 4);
    for (int i = 0; i < 4; ++i) {
        CHECK(s[i].t == doctest::Approx(0.5 + i));
        CHECK(s[i].delta == doctest::Approx(1.0));
    }
}

TEST_CASE("jittered samples stay inside their strata and deltas chain") {
    Ray r{{0, 0, 0}, {0, 1, 0}};
    Rng rng(5);
    std::vector<RaySample> s;
    int n = sample_along_ray(r, 1.0, 3.0, 8, nullptr, &rng, s);
    REQUIRE(n == 8);
    double width = 2.0 / 8;
    for (int i = 0; i < 8; ++i) {
        CHECK(s[i].t >= 1.0 + i * width);
        CHECK(s[i].t < 1.0 + (i + 1) * width);
        if (i + 1 < 8) CHECK(s[i].delta == doctest::Approx(s[i + 1].t - s[i].t));
    }
    CHECK(s[7].delta == doctest::Approx(std::max(3.0 - s[7].t, width)));
}

TEST_CASE("occupancy pruning drops samples and bridges deltas") {
    AABB box = AABB::cube(2.0);
    OccupancyGrid occ = OccupancyGrid::make(4, box);
    // Mark the central band along x as empty: cells with x in [-1, 1).
    for (int z = 0; z < 4; ++z)
        for (int y = 0; y < 4; ++y)
            for (int x = 1; x < 3; ++x) occ.occupied[(size_t(z) * 4 + y) * 4 + x] = 0;

    Ray r{{-2, 0.1, 0.1}, {1, 0, 0}};
    std::vector<RaySample> s;
    int n = sample_along_ray(r, 0.0, 4.0, 8, &occ, nullptr, s);
    REQUIRE(n == 4);  // strata centered at x=-1.75..-1.25 and 1.25..1.75
    CHECK(s[1].t == doctest::Approx(0.75));
    CHECK(s[2].t == doctest::Approx(3.25));
    CHECK(s[1].delta == doctest::Approx(2.5));  // bridges the pruned band
    CHECK(s[3].delta == doctest::Approx(std::max(4.0 - 3.75, 0.5)));
}

TEST_CASE("compositing matches the single-sample worked example") {
    double sigma = 1.0, delta = 1.0;
    Vec3 c{1, 0, 0};
    QuadratureResult q = composite_ray(&sigma, &c, &delta, 1, Vec3{0, 0, 0});
    double a = 1.0 - std::exp(-1.0);
    CHECK(q.color.x == doctest::Approx(a));
    CHECK(q.color.y == doctest::Approx(0.0));
    CHECK(q.opacity == doctest::Approx(a));
}

TEST_CASE("zero density yields the background and zero opacity") {
    std::vector<double> sigma(5, 0.0), delta(5, 0.3);
    std::vector<Vec3> c(5, Vec3{0.2, 0.4, 0.6});
    Vec3 bg{0.9, 0.8, 0.7};
    QuadratureResult q = composite_ray(sigma.data(), c.data(), delta.data(), 5, bg);
    CHECK(q.color.x == doctest::Approx(bg.x));
    CHECK(q.color.z == doctest::Approx(bg.z));
    CHECK(q.opacity == doctest::Approx(0.0));
}

TEST_CASE("an opaque first sample hides everything behind it") {
    std::vector<double> sigma = {1e9, 5.0}, delta = {1.0, 1.0};
    std::vector<Vec3> c = {{0.1, 0.2, 0.3}, {0.9, 0.9, 0.9}};
    QuadratureResult q = composite_ray(sigma.data(), c.data(), delta.data(), 2, Vec3{1, 1, 1});
    CHECK(q.color.x == doctest::Approx(0.1));
    CHECK(q.opacity == doctest::Approx(1.0));
}

TEST_CASE("compositing equals the analytic piecewise-constant integral") {
    // Strata-aligned piecewise-constant medium: quadrature must equal the
    // exact emission-absorption integral computed via cumulative optical depth.
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 1 + int(rng.uniform_int(8));
        std::vector<double> sigma(n), delta(n, 0.5);
        std::vector<Vec3> color(n);
        for (int i = 0; i < n; ++i) {
            sigma[i] = rng.uniform(0.0, 4.0);
            color[i] = {rng.uniform(), rng.uniform(), rng.uniform()};
        }
        Vec3 bg{rng.uniform(), rng.uniform(), rng.uniform()};

        double tau = 0.0;
        Vec3 expect{0, 0, 0};
        for (int i = 0; i < n; ++i) {
            double t0 = std::exp(-tau);
            tau += sigma[i] * delta[i];
            double t1 = std::exp(-tau);
            expect += color[i] * (t0 - t1);  // integral of T sigma c over the segment
        }
        expect += bg * std::exp(-tau);

        QuadratureResult q = composite_ray(sigma.data(), color.data(), delta.data(), n, bg);
        for (int a = 0; a < 3; ++a) CHECK(std::abs(q.color[a] - expect[a]) < 1e-12);
        CHECK(std::abs(q.opacity - (1.0 - std::exp(-tau))) < 1e-12);
    }
}

TEST_CASE("compositing backward matches finite differences") {
    Rng rng(9);
    int n = 6;
    std::vector<double> sigma(n), delta(n);
    std::vector<Vec3> color(n);
    for (int i = 0; i < n; ++i) {
        sigma[i] = rng.uniform(0.1, 3.0);
        delta[i] = rng.uniform(0.1, 0.8);
        color[i] = {rng.uniform(), rng.uniform(), rng.uniform()};
    }
    Vec3 bg{0.3, 0.6, 0.9};
    Vec3 wc{1.0, -0.7, 0.4};
    double wo = 0.8;

    auto value = [&]() {
        QuadratureResult q = composite_ray(sigma.data(), color.data(), delta.data(), n, bg);
        return dot(wc, q.color) + wo * q.opacity;
    };

    std::vector<double> dsigma(n);
    std::vector<Vec3> dcolor(n);
    composite_ray_backward(sigma.data(), color.data(), delta.data(), n, bg, wc, wo,
                           dsigma.data(), dcolor.data());

    for (int i = 0; i < n; ++i) {
        double fd = fd_central(&sigma[i], value);
        CHECK(rel_err(fd, dsigma[i]) < 1e-6);
        Vec3 fdc = fd_central_vec3(&color[i], value);
        for (int a = 0; a < 3; ++a) CHECK(rel_err(fdc[a], dcolor[i][a]) < 1e-6);
    }
}

TEST_CASE("loss identities") {
    // Render loss: mean over rays of squared error.
    std::vector<Vec3> pred = {{1, 0, 0}, {0, 0, 0}};
    std::vector<Vec3> gt = {{0, 0, 0}, {0, 0, 0}};
    CHECK(loss_render(pred, gt) == doctest::Approx(0.5));

    // Entropy: alpha 0.5 contributes exactly ln 2; endpoints contribute 0.
    CHECK(loss_entropy({0.5, 0.5}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(loss_entropy({0.0, 1.0}) == doctest::Approx(0.0));
    CHECK(entropy_term_grad(0.5) == doctest::Approx(0.0));

    // Specular magnitude penalty.
    CHECK(loss_specular_l2({{1, 1, 1}, {0, 0, 0}}) == doctest::Approx(1.5));
}

TEST_CASE("total variation is zero on constant grids and exact on a hand case") {
    Rng rng(11);
    FeatureGrid g = FeatureGrid::make(1, 1, 2, 2, AABB::cube(1.0), rng);
    for (auto& v : g.values[0]) v = 0.7;
    CHECK(loss_total_variation(g, nullptr) == doctest::Approx(0.0));

    // 2x2x2 cube with a single corner raised to 1: that corner has 3 incident
    // edges, each contributing 1; 12 edges total.
    for (auto& v : g.values[0]) v = 0.0;
    g.values[0][0] = 1.0;
    CHECK(loss_total_variation(g, nullptr) == doctest::Approx(3.0 / 12.0));
}

TEST_CASE("total variation gradient matches finite differences") {
    Rng rng(12);
    FeatureGrid g = FeatureGrid::make(2, 2, 3, 5, AABB::cube(1.0), rng, 0.5);
    GridGrad grad;
    double base = loss_total_variation(g, &grad);
    CHECK(base > 0.0);
    auto value = [&]() { return loss_total_variation(g, nullptr); };
    for (size_t l = 0; l < g.values.size(); ++l)
        for (size_t i = 0; i < g.values[l].size(); i += 13) {
            double fd = fd_central(&g.values[l][i], value);
            CHECK(rel_err(fd, grad.values[l][i]) < 1e-5);
        }
}

TEST_CASE("occupancy starts full, decays empty space, and keeps the floor") {
    FieldConfig fcfg;
    fcfg.levels = 1;
    fcfg.base_res = 2;
    fcfg.geo_max_res = 2;
    fcfg.geo_hidden = 4;
    Rng rng(13);
    GeometryField geo = GeometryField::make(fcfg, AABB::cube(1.0), rng);
    geo.mlp.layers.back().b[0] = -40.0;  // density everywhere ~ exp(-15)

    OccupancyGrid occ = OccupancyGrid::make(4, AABB::cube(1.0), 0.5);
    CHECK(occ.occupied_fraction() == doctest::Approx(1.0));
    CHECK(occ.test({0.2, 0.2, 0.2}));
    CHECK_FALSE(occ.test({5, 0, 0}));

    for (int i = 0; i < 30; ++i) occ.update(geo, 77);
    CHECK(occ.threshold == doctest::Approx(1e-2));  // floor engages
    CHECK(occ.occupied_fraction() == doctest::Approx(0.0));
}

TEST_CASE("occupancy keeps dense half-space occupied") {
    // Single-level res-2 grid with an identity readout: the raw density is the
    // trilinear blend of the corner values, high at x=+1 and low at x=-1.
    GeometryField geo;
    Rng rng(14);
    geo.grid = FeatureGrid::make(1, 1, 2, 2, AABB::cube(1.0), rng);
    for (int z = 0; z < 2; ++z)
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 2; ++x)
                geo.grid.values[0][(size_t(z) * 2 + y) * 2 + x] = x == 1 ? 30.0 : -30.0;
    geo.mlp.layers.clear();
    FieldMLP::Layer l;
    l.in = 1;
    l.out = 1;
    l.w = {1.0};
    l.b = {0.0};
    geo.mlp.layers.push_back(l);

    OccupancyGrid occ = OccupancyGrid::make(8, AABB::cube(1.0), 0.5);
    for (int i = 0; i < 40; ++i) occ.update(geo, 7);
    CHECK(occ.test({0.9, 0.0, 0.0}));
    CHECK_FALSE(occ.test({-0.9, 0.0, 0.0}));
    double f = occ.occupied_fraction();
    CHECK(f > 0.2);
    CHECK(f < 0.8);
}

TEST_CASE("learning rate schedule decays exponentially between endpoints") {
    CHECK(lr_schedule(1e-2, 1e-3, 0, 100) == doctest::Approx(1e-2));
    CHECK(lr_schedule(1e-2, 1e-3, 99, 100) == doctest::Approx(1e-3));
    double mid = lr_schedule(1e-2, 1e-3, 49, 100);
    CHECK(mid < 1e-2);
    CHECK(mid > 1e-3);
    // Halfway in log space.
    CHECK(std::log10(mid) == doctest::Approx(0.5 * (std::log10(1e-2) + std::log10(1e-3)))
                                 .epsilon(1e-2));
}

namespace {

Dataset tiny_dataset(SyntheticScene& scene) {
    scene.shape = ShapeKind::sphere;
    scene.radius = 0.8;
    scene.bound = 1.0;
    scene.gloss = 0.3;
    SyntheticConfig scfg;
    scfg.n_train = 8;
    scfg.n_test = 2;
    scfg.resolution = 24;
    return generate_synthetic_dataset(scene, scfg, 1);
}

Stage1Config tiny_stage1() {
    Stage1Config cfg;
    cfg.steps = 160;
    cfg.points_per_step = 2048;
    cfg.max_samples_per_ray = 32;
    cfg.diffuse_only_steps = 60;
    cfg.occ_res = 16;
    cfg.log_interval = 1000;
    return cfg;
}

FieldConfig tiny_fields() {
    FieldConfig fcfg;
    fcfg.levels = 4;
    fcfg.base_res = 8;
    fcfg.geo_max_res = 24;
    fcfg.app_max_res = 24;
    fcfg.geo_hidden = 16;
    fcfg.app_hidden = 24;
    fcfg.spec_hidden = 16;
    return fcfg;
}

}  // namespace

TEST_CASE("stage1 training reduces the loss and is seed-deterministic") {
    SyntheticScene scene;
    Dataset ds = tiny_dataset(scene);
    FieldConfig fcfg = tiny_fields();
    Stage1Config cfg = tiny_stage1();
    AABB domain = AABB::cube(ds.scene_bound);

    auto run = [&]() {
        Rng rng(100);
        GeometryField geo = GeometryField::make(fcfg, domain, rng);
        AppearanceField app = AppearanceField::make(fcfg, domain, rng);
        OccupancyGrid occ = OccupancyGrid::make(cfg.occ_res, domain, cfg.occ_decay);
        Stage1Report rep = train_stage1(ds, cfg, 42, geo, app, occ, nullptr);
        return rep;
    };

    Stage1Report r1 = run();
    CHECK(r1.total_rays > 0);
    CHECK(r1.final_train_psnr > 14.0);

    Stage1Report r2 = run();
    CHECK(r1.final_loss == r2.final_loss);
    CHECK(r1.final_train_psnr == r2.final_train_psnr);
}

TEST_CASE("render_view on an empty field returns the background") {
    FieldConfig fcfg = tiny_fields();
    Rng rng(1);
    AABB domain = AABB::cube(1.0);
    GeometryField geo = GeometryField::make(fcfg, domain, rng);
    geo.mlp.layers.back().b[0] = -40.0;
    AppearanceField app = AppearanceField::make(fcfg, domain, rng);
    CameraModel cam = CameraModel::look_at({3, 0, 0}, {0, 0, 0}, {0, 0, 1}, 16, 16, 0.8);
    Vec3 bg{0.25, 0.5, 0.75};
    Image img = render_view(geo, app, nullptr, cam, domain, bg, 32);
    for (size_t i = 0; i < img.pixel_count(); ++i) {
        Vec3 c = img.at_index(i);
        CHECK(std::abs(c.x - bg.x) < 1e-6);
        CHECK(std::abs(c.z - bg.z) < 1e-6);
    }
}
