#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "rfmesh/checkpoint.hpp"
#include "rfmesh/errors.hpp"
#include "rfmesh/fields.hpp"
#include "rfmesh/grid.hpp"
#include "rfmesh/mlp.hpp"
#include "rfmesh/occupancy.hpp"
#include "rfmesh/sh.hpp"
#include "test_support.hpp"

using namespace rfmesh;
using namespace rfmesh_test;

namespace {

FieldConfig small_field_config() {
    FieldConfig cfg;
    cfg.levels = 3;
    cfg.base_res = 4;
    cfg.geo_max_res = 10;
    cfg.app_max_res = 10;
    cfg.geo_hidden = 8;
    cfg.app_hidden = 12;
    cfg.spec_hidden = 8;
    return cfg;
}

}  // namespace

TEST_CASE("grid resolutions form a strictly increasing progression") {
    Rng rng(1);
    FeatureGrid g = FeatureGrid::make(16, 1, 16, 128, AABB::cube(1.0), rng);
    REQUIRE(g.level_res.size() == 16);
    CHECK(g.level_res.front() == 16);
    CHECK(g.level_res.back() == 128);
    for (int l = 1; l < 16; ++l) CHECK(g.level_res[l] > g.level_res[l - 1]);
    CHECK(g.encoding_dim() == 16);
}

TEST_CASE("grid init is uniform in [-1e-4, 1e-4] and seed-deterministic") {
    Rng a(7), b(7);
    FeatureGrid g1 = FeatureGrid::make(2, 2, 4, 8, AABB::cube(1.0), a);
    FeatureGrid g2 = FeatureGrid::make(2, 2, 4, 8, AABB::cube(1.0), b);
    for (size_t l = 0; l < g1.values.size(); ++l)
        for (size_t i = 0; i < g1.values[l].size(); ++i) {
            CHECK(g1.values[l][i] == g2.values[l][i]);
            CHECK(std::abs(g1.values[l][i]) <= 1e-4);
        }
}

TEST_CASE("encode at a lattice vertex returns that vertex's features") {
    Rng rng(3);
    AABB domain({-2, -1, 0}, {2, 3, 4});
    FeatureGrid g = FeatureGrid::make(1, 2, 5, 5, domain, rng, 0.5);
    int R = g.level_res[0];
    for (int k : {0, 1, 3, 4}) {
        Vec3 x = domain.lo + domain.extent() * (double(k) / (R - 1));
        double out[2];
        g.encode(x, out);
        size_t idx = ((size_t(k) * R + k) * R + k) * 2;
        CHECK(out[0] == doctest::Approx(g.values[0][idx]).epsilon(1e-12));
        CHECK(out[1] == doctest::Approx(g.values[0][idx + 1]).epsilon(1e-12));
    }
}

TEST_CASE("trilinear interpolation reproduces linear functions exactly") {
    Rng rng(4);
    AABB domain({-1, -1, -1}, {1, 1, 1});
    FeatureGrid g = FeatureGrid::make(1, 1, 6, 6, domain, rng);
    int R = g.level_res[0];
    auto f = [](const Vec3& p) { return 2.0 * p.x + 3.0 * p.y - p.z + 0.5; };
    for (int z = 0; z < R; ++z)
        for (int y = 0; y < R; ++y)
            for (int x = 0; x < R; ++x) {
                Vec3 p = domain.lo + domain.extent() * Vec3{double(x) / (R - 1),
                                                            double(y) / (R - 1),
                                                            double(z) / (R - 1)};
                g.values[0][(size_t(z) * R + y) * R + x] = f(p);
            }
    Rng prng(5);
    for (int i = 0; i < 50; ++i) {
        Vec3 p = prng.uniform_in_box(domain);
        double out;
        g.encode(p, &out);
        CHECK(out == doctest::Approx(f(p)).epsilon(1e-12));
    }
}

TEST_CASE("encode clamps points outside the domain to the boundary") {
    Rng rng(6);
    AABB domain = AABB::cube(1.0);
    FeatureGrid g = FeatureGrid::make(2, 1, 4, 8, domain, rng, 0.3);
    double inside[2], outside[2];
    g.encode({1.0, 0.3, -0.2}, inside);
    g.encode({5.0, 0.3, -0.2}, outside);
    CHECK(inside[0] == outside[0]);
    CHECK(inside[1] == outside[1]);
}

TEST_CASE("grid backward matches finite differences") {
    Rng rng(8);
    AABB domain = AABB::cube(1.2);
    FeatureGrid g = FeatureGrid::make(2, 2, 4, 9, domain, rng, 0.4);
    double dout[4] = {0.7, -1.3, 0.4, 2.1};
    Vec3 x{0.31, -0.42, 0.55};

    auto value = [&]() {
        double out[4];
        g.encode(x, out);
        return dout[0] * out[0] + dout[1] * out[1] + dout[2] * out[2] + dout[3] * out[3];
    };

    GridGrad grad;
    Vec3 dx{0, 0, 0};
    g.encode_backward(x, dout, grad, &dx);

    // Parameter gradients on every touched entry (and some untouched ones).
    int checked = 0;
    for (size_t l = 0; l < g.values.size(); ++l)
        for (size_t i = 0; i < g.values[l].size(); ++i) {
            if (grad.values[l][i] == 0.0 && i % 37 != 0) continue;
            double fd = fd_central(&g.values[l][i], value);
            CHECK(std::abs(fd - grad.values[l][i]) < 1e-7);
            ++checked;
        }
    CHECK(checked >= 16);

    Vec3 fd = fd_central_vec3(&x, value);
    for (int a = 0; a < 3; ++a) CHECK(rel_err(fd[a], dx[a]) < 1e-6);
}

TEST_CASE("mlp forward computes an exact tiny case with relu") {
    FieldMLP net;
    FieldMLP::Layer l0;
    l0.in = 2;
    l0.out = 2;
    l0.w = {1, 2, -3, -4};  // rows: [1,2], [-3,-4]
    l0.b = {0.5, 1.0};
    FieldMLP::Layer l1;
    l1.in = 2;
    l1.out = 1;
    l1.w = {1, 1};
    l1.b = {0.25};
    net.layers = {l0, l1};

    double in[2] = {1.0, 1.0};
    double out;
    net.forward(in, &out);
    // Hidden pre-activations: 3.5 and -6 -> relu -> {3.5, 0}; out = 3.75.
    CHECK(out == doctest::Approx(3.75));
}

TEST_CASE("mlp init respects kaiming bounds with zero biases") {
    Rng rng(11);
    FieldMLP net = FieldMLP::make({16, 32, 3}, rng);
    for (const auto& layer : net.layers) {
        double bound = std::sqrt(6.0 / layer.in);
        for (double w : layer.w) CHECK(std::abs(w) <= bound);
        for (double b : layer.b) CHECK(b == 0.0);
    }
}

TEST_CASE("mlp backward matches finite differences everywhere") {
    Rng rng(12);
    FieldMLP net = FieldMLP::make({5, 8, 8, 3}, rng);
    std::vector<double> input = {0.3, -0.8, 1.2, 0.05, -0.4};
    double dout[3] = {1.0, -2.0, 0.5};

    auto value = [&]() {
        double out[3];
        net.forward(input.data(), out);
        return dout[0] * out[0] + dout[1] * out[1] + dout[2] * out[2];
    };

    MlpCache cache;
    double out[3];
    net.forward(input.data(), out, &cache);
    MlpGrad grad;
    std::vector<double> din(5);
    net.backward(cache, dout, grad, din.data());

    for (size_t l = 0; l < net.layers.size(); ++l) {
        for (size_t i = 0; i < net.layers[l].w.size(); ++i) {
            double fd = fd_central(&net.layers[l].w[i], value);
            CHECK(rel_err(fd, grad.w[l][i]) < 1e-6);
        }
        for (size_t i = 0; i < net.layers[l].b.size(); ++i) {
            double fd = fd_central(&net.layers[l].b[i], value);
            CHECK(rel_err(fd, grad.b[l][i]) < 1e-6);
        }
    }
    for (size_t i = 0; i < input.size(); ++i) {
        double fd = fd_central(&input[i], value);
        CHECK(rel_err(fd, din[i]) < 1e-6);
    }
}

TEST_CASE("sh basis is orthonormal under sphere quadrature") {
    const int n = 40000;
    double gram[kShDim][kShDim] = {};
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
        double z = 1.0 - 2.0 * (i + 0.5) / n;
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        double phi = golden * i;
        Vec3 d{r * std::cos(phi), r * std::sin(phi), z};
        double sh[kShDim];
        sh_basis(d, sh);
        for (int a = 0; a < kShDim; ++a)
            for (int b = a; b < kShDim; ++b) gram[a][b] += sh[a] * sh[b];
    }
    double scale = 4.0 * kPi / n;
    for (int a = 0; a < kShDim; ++a)
        for (int b = a; b < kShDim; ++b) {
            double v = gram[a][b] * scale;
            if (a == b)
                CHECK(std::abs(v - 1.0) < 2e-2);
            else
                CHECK(std::abs(v) < 2e-2);
        }
}

TEST_CASE("sh gradient through normalization matches finite differences") {
    Rng rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        Vec3 v = rng.uniform_unit_vector() * rng.uniform(0.5, 2.0);
        double w[kShDim];
        for (int k = 0; k < kShDim; ++k) w[k] = rng.uniform(-1.0, 1.0);

        auto value = [&]() {
            double sh[kShDim];
            sh_basis(normalize(v), sh);
            double s = 0.0;
            for (int k = 0; k < kShDim; ++k) s += w[k] * sh[k];
            return s;
        };
        Vec3 analytic = sh_chain_unnormalized(v, w);
        Vec3 fd = fd_central_vec3(&v, value);
        for (int a = 0; a < 3; ++a) CHECK(rel_err(fd[a], analytic[a]) < 1e-6);
    }
}

TEST_CASE("freshly initialized density is near one") {
    Rng rng(14);
    GeometryField geo = GeometryField::make(small_field_config(), AABB::cube(1.0), rng);
    Rng prng(15);
    for (int i = 0; i < 20; ++i) {
        double sigma = geo.density(prng.uniform_in_box(geo.grid.domain));
        CHECK(sigma > 0.9);
        CHECK(sigma < 1.1);
    }
}

TEST_CASE("density clamps the raw output at +-15 with zero gradient outside") {
    Rng rng(16);
    GeometryField geo = GeometryField::make(small_field_config(), AABB::cube(1.0), rng);
    geo.mlp.layers.back().b[0] = 40.0;  // push raw past the clamp
    Vec3 x{0.1, 0.2, -0.3};
    GeoPointCache cache;
    CHECK(geo.density_cached(x, cache) == doctest::Approx(std::exp(15.0)));

    GeometryGrad grad;
    grad.grid = geo.grid.make_grad();
    grad.mlp = geo.mlp.make_grad();
    geo.density_backward(x, cache, 1.0, grad, nullptr);
    double sum = 0.0;
    for (const auto& l : grad.grid.values)
        for (double v : l) sum += std::abs(v);
    for (const auto& l : grad.mlp.w)
        for (double v : l) sum += std::abs(v);
    CHECK(sum == 0.0);

    geo.mlp.layers.back().b[0] = -40.0;
    CHECK(geo.density(x) == doctest::Approx(std::exp(-15.0)));
}

TEST_CASE("geometry backward matches finite differences") {
    Rng rng(17);
    GeometryField geo = GeometryField::make(small_field_config(), AABB::cube(1.0), rng);
    // Give the grid meaningful values so position gradients are nonzero.
    Rng vr(18);
    for (auto& lv : geo.grid.values)
        for (auto& v : lv) v = vr.uniform(-0.5, 0.5);

    Vec3 x{0.21, -0.37, 0.44};
    auto value = [&]() { return geo.density(x); };

    GeoPointCache cache;
    geo.density_cached(x, cache);
    GeometryGrad grad;
    grad.grid = geo.grid.make_grad();
    grad.mlp = geo.mlp.make_grad();
    Vec3 dx{0, 0, 0};
    geo.density_backward(x, cache, 1.0, grad, &dx);

    int checked = 0;
    for (size_t l = 0; l < geo.grid.values.size(); ++l)
        for (size_t i = 0; i < geo.grid.values[l].size(); ++i) {
            if (grad.grid.values[l][i] == 0.0) continue;
            double fd = fd_central(&geo.grid.values[l][i], value);
            CHECK(rel_err(fd, grad.grid.values[l][i]) < 1e-5);
            ++checked;
        }
    CHECK(checked >= 8);
    for (size_t l = 0; l < geo.mlp.layers.size(); ++l)
        for (size_t i = 0; i < geo.mlp.layers[l].w.size(); ++i) {
            double fd = fd_central(&geo.mlp.layers[l].w[i], value);
            if (fd == 0.0 && grad.mlp.w[l][i] == 0.0) continue;
            CHECK(rel_err(fd, grad.mlp.w[l][i]) < 1e-5);
        }
    Vec3 fd = fd_central_vec3(&x, value);
    for (int a = 0; a < 3; ++a) CHECK(rel_err(fd[a], dx[a]) < 1e-5);
}

TEST_CASE("appearance evaluation composes diffuse plus specular sigmoids") {
    Rng rng(19);
    AppearanceField app = AppearanceField::make(small_field_config(), AABB::cube(1.0), rng);
    Vec3 x{0.3, 0.1, -0.2}, view{1.0, -2.0, 0.5};

    Vec3 c_d, f_s;
    app.eval_base(x, c_d, f_s);
    for (int a = 0; a < 3; ++a) {
        CHECK(c_d[a] > 0.0);
        CHECK(c_d[a] < 1.0);
        CHECK(f_s[a] > 0.0);
        CHECK(f_s[a] < 1.0);
    }
    Vec3 c_s = app.eval_specular(f_s, view);
    Vec3 full = app.eval_color(x, view, false);
    Vec3 diffuse = app.eval_color(x, view, true);
    for (int a = 0; a < 3; ++a) {
        CHECK(full[a] == doctest::Approx(c_d[a] + c_s[a]));
        CHECK(diffuse[a] == doctest::Approx(c_d[a]));
    }
    // The specular head must depend on the view direction.
    Vec3 c_s2 = app.eval_specular(f_s, Vec3{-0.3, 1.0, 2.0});
    CHECK(norm(c_s - c_s2) > 0.0);
}

TEST_CASE("appearance backward matches finite differences") {
    Rng rng(20);
    AppearanceField app = AppearanceField::make(small_field_config(), AABB::cube(1.0), rng);
    Rng vr(21);
    for (auto& lv : app.grid.values)
        for (auto& v : lv) v = vr.uniform(-0.5, 0.5);

    Vec3 x{-0.15, 0.33, 0.08};
    Vec3 view{0.7, -1.1, 0.4};
    Vec3 wsum{1.0, -0.5, 2.0};

    auto value = [&]() { return dot(wsum, app.eval_color(x, view, false)); };

    AppPointCache base_cache;
    SpecPointCache spec_cache;
    Vec3 c_d, f_s;
    app.eval_base(x, c_d, f_s, &base_cache);
    app.eval_specular(f_s, view, &spec_cache);

    AppearanceGrad grad;
    grad.grid = app.grid.make_grad();
    grad.mlp1 = app.mlp1.make_grad();
    grad.mlp2 = app.mlp2.make_grad();
    Vec3 df_s{0, 0, 0}, dview{0, 0, 0}, dx{0, 0, 0};
    app.specular_backward(spec_cache, wsum, grad, &df_s, &dview);
    app.base_backward(x, base_cache, wsum, df_s, grad, &dx);

    Vec3 fd_x = fd_central_vec3(&x, value);
    for (int a = 0; a < 3; ++a) CHECK(rel_err(fd_x[a], dx[a]) < 1e-5);
    Vec3 fd_view = fd_central_vec3(&view, value);
    for (int a = 0; a < 3; ++a) CHECK(rel_err(fd_view[a], dview[a]) < 1e-5);

    int checked = 0;
    for (size_t l = 0; l < app.grid.values.size(); ++l)
        for (size_t i = 0; i < app.grid.values[l].size(); ++i) {
            if (grad.grid.values[l][i] == 0.0) continue;
            double fd = fd_central(&app.grid.values[l][i], value, 1e-5);
            CHECK(rel_err(fd, grad.grid.values[l][i]) < 1e-4);
            ++checked;
        }
    CHECK(checked >= 8);
    for (size_t i = 0; i < app.mlp2.layers[0].w.size(); i += 7) {
        double fd = fd_central(&app.mlp2.layers[0].w[i], value);
        if (fd == 0.0 && grad.mlp2.w[0][i] == 0.0) continue;
        CHECK(rel_err(fd, grad.mlp2.w[0][i]) < 1e-5);
    }
    for (size_t i = 0; i < app.mlp1.layers[0].w.size(); i += 11) {
        double fd = fd_central(&app.mlp1.layers[0].w[i], value);
        if (fd == 0.0 && grad.mlp1.w[0][i] == 0.0) continue;
        CHECK(rel_err(fd, grad.mlp1.w[0][i]) < 1e-5);
    }
}

TEST_CASE("checkpoint round trip preserves fields and occupancy exactly") {
    Rng rng(22);
    FieldConfig fcfg = small_field_config();
    AABB domain = AABB::cube(1.5);
    GeometryField geo = GeometryField::make(fcfg, domain, rng);
    AppearanceField app = AppearanceField::make(fcfg, domain, rng);
    OccupancyGrid occ = OccupancyGrid::make(8, domain);
    occ.update(geo, 99);

    auto dir = std::filesystem::temp_directory_path() / "rfmesh_field_test";
    std::filesystem::create_directories(dir);
    std::string path = (dir / "ck.bin").string();
    save_checkpoint(path, geo, app, occ);

    GeometryField geo2;
    AppearanceField app2;
    OccupancyGrid occ2;
    load_checkpoint(path, geo2, app2, occ2);

    CHECK(geo2.grid.level_res == geo.grid.level_res);
    for (size_t l = 0; l < geo.grid.values.size(); ++l)
        CHECK(geo2.grid.values[l] == geo.grid.values[l]);
    for (size_t l = 0; l < app.mlp1.layers.size(); ++l)
        CHECK(app2.mlp1.layers[l].w == app.mlp1.layers[l].w);
    CHECK(occ2.running == occ.running);
    CHECK(occ2.threshold == occ.threshold);
    CHECK(occ2.epoch == occ.epoch);

    Rng prng(23);
    for (int i = 0; i < 10; ++i) {
        Vec3 p = prng.uniform_in_box(domain);
        CHECK(geo.density(p) == geo2.density(p));
        Vec3 v = prng.uniform_unit_vector();
        Vec3 c1 = app.eval_color(p, v, false);
        Vec3 c2 = app2.eval_color(p, v, false);
        CHECK(c1.x == c2.x);
        CHECK(c1.y == c2.y);
        CHECK(c1.z == c2.z);
    }

    // Corruption and truncation are input errors.
    {
        std::ofstream f(path, std::ios::binary);
        f << "not a checkpoint";
    }
    CHECK_THROWS_AS(load_checkpoint(path, geo2, app2, occ2), InputError);
    save_checkpoint(path, geo, app, occ);
    auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size - 64);
    CHECK_THROWS_AS(load_checkpoint(path, geo2, app2, occ2), InputError);
}
