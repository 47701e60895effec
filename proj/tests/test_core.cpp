#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "rfmesh/camera.hpp"
#include "rfmesh/errors.hpp"
#include "rfmesh/image.hpp"
#include "rfmesh/math.hpp"
#include "rfmesh/parallel.hpp"
#include "rfmesh/rng.hpp"

using namespace rfmesh;

namespace {
std::string temp_dir() {
    auto d = std::filesystem::temp_directory_path() / "rfmesh_core_test";
    std::filesystem::create_directories(d);
    return d.string();
}
}  // namespace

TEST_CASE("vec and mat basics") {
    Vec3 a{1, 2, 3}, b{4, 5, 6};
    CHECK(dot(a, b) == doctest::Approx(32.0));
    Vec3 c = cross(Vec3{1, 0, 0}, Vec3{0, 1, 0});
    CHECK(c.z == doctest::Approx(1.0));
    CHECK(norm(normalize(Vec3{3, 4, 0})) == doctest::Approx(1.0));

    Mat4 m;
    m.m[0][3] = 2.0;
    Vec3 p = m.transform_point({1, 1, 1});
    CHECK(p.x == doctest::Approx(3.0));
    Mat4 inv = m.rigid_inverse();
    Vec3 back = inv.transform_point(p);
    CHECK(back.x == doctest::Approx(1.0));
    CHECK(back.y == doctest::Approx(1.0));
}

TEST_CASE("aabb slab intersection clips to the positive ray") {
    AABB box = AABB::cube(1.0);
    Ray r{{0, 0, 3}, {0, 0, -1}};
    double t0, t1;
    REQUIRE(intersect_aabb(r, box, t0, t1));
    CHECK(t0 == doctest::Approx(2.0));
    CHECK(t1 == doctest::Approx(4.0));

    Ray inside{{0, 0, 0}, {1, 0, 0}};
    REQUIRE(intersect_aabb(inside, box, t0, t1));
    CHECK(t0 == doctest::Approx(0.0));
    CHECK(t1 == doctest::Approx(1.0));

    Ray miss{{0, 5, 3}, {0, 0, -1}};
    CHECK_FALSE(intersect_aabb(miss, box, t0, t1));
}

TEST_CASE("triangle intersection") {
    Vec3 v0{0, 0, 0}, v1{1, 0, 0}, v2{0, 1, 0};
    double t, u, v;
    Ray r{{0.2, 0.3, 1.0}, {0, 0, -1}};
    REQUIRE(intersect_triangle(r, v0, v1, v2, 0.0, kInf, t, u, v));
    CHECK(t == doctest::Approx(1.0));
    CHECK(u == doctest::Approx(0.2));
    CHECK(v == doctest::Approx(0.3));
    // Two-sided: flipped winding still hits.
    REQUIRE(intersect_triangle(r, v0, v2, v1, 0.0, kInf, t, u, v));
    Ray out{{2.0, 2.0, 1.0}, {0, 0, -1}};
    CHECK_FALSE(intersect_triangle(out, v0, v1, v2, 0.0, kInf, t, u, v));
}

TEST_CASE("rng reproducibility and ranges") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) {
        double x = a.uniform();
        CHECK(x == b.uniform());
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }
    Rng c(42), d(43);
    bool differ = false;
    for (int i = 0; i < 10; ++i) differ |= c.uniform() != d.uniform();
    CHECK(differ);
    Rng e(7);
    for (int i = 0; i < 100; ++i) {
        int64_t v = e.uniform_int(13);
        CHECK(v >= 0);
        CHECK(v < 13);
    }
    CHECK(norm(Rng(3).uniform_unit_vector()) == doctest::Approx(1.0));
}

TEST_CASE("parallel chunked reduction is deterministic per worker count") {
    const int64_t n = 100000;
    auto run = [&](int workers) {
        set_worker_count(workers);
        std::vector<double> partial(worker_count(), 0.0);
        parallel_chunks(n, 0, [&](int w, int64_t b, int64_t e) {
            for (int64_t i = b; i < e; ++i) partial[w] += std::sin(double(i)) * 1e-3;
        });
        double s = 0.0;
        for (double p : partial) s += p;
        return s;
    };
    double s1 = run(1);
    double s1b = run(1);
    double s2 = run(2);
    double s2b = run(2);
    CHECK(s1 == s1b);
    CHECK(s2 == s2b);
    CHECK(s1 == doctest::Approx(s2).epsilon(1e-12));
    set_worker_count(1);
}

TEST_CASE("parallel propagates exceptions") {
    set_worker_count(2);
    CHECK_THROWS_AS(parallel_for(100, [](int64_t i) {
        if (i == 57) throw RuntimeFailure("boom");
    }),
                    RuntimeFailure);
    set_worker_count(1);
    // The pool must still work after an exception.
    std::vector<int> hits(10, 0);
    parallel_for(10, [&](int64_t i) { hits[i] = 1; });
    for (int h : hits) CHECK(h == 1);
}

TEST_CASE("quantization rule") {
    CHECK(quantize_u8(0.0) == 0);
    CHECK(quantize_u8(1.0) == 255);
    CHECK(quantize_u8(-0.5) == 0);
    CHECK(quantize_u8(2.0) == 255);
    CHECK(quantize_u8(0.5) == 128);          // 127.5 rounds away from zero
    CHECK(quantize_u8(127.4 / 255.0) == 127);
    CHECK(quantize_u8(127.6 / 255.0) == 128);
}

TEST_CASE("png round trip is exact on quantized values") {
    Image img(7, 5);
    Rng rng(123);
    for (size_t i = 0; i < img.rgb.size(); ++i)
        img.rgb[i] = dequantize_u8(uint8_t(rng.uniform_int(256)));
    std::string path = temp_dir() + "/round.png";
    save_png(path, img);
    Image back = load_png(path, Vec3{0, 0, 0});
    REQUIRE(back.width == img.width);
    REQUIRE(back.height == img.height);
    for (size_t i = 0; i < img.rgb.size(); ++i) CHECK(back.rgb[i] == img.rgb[i]);
}

TEST_CASE("png alpha composites over background") {
    std::vector<uint8_t> rgba = {255, 0, 0, 255, 0, 0, 0, 0};  // opaque red, transparent
    std::string path = temp_dir() + "/alpha.png";
    save_png_bytes(path, 2, 1, 4, rgba);
    Image img = load_png(path, Vec3{1, 1, 1});
    CHECK(img.at(0, 0).x == doctest::Approx(1.0));
    CHECK(img.at(0, 0).y == doctest::Approx(0.0));
    CHECK(img.at(1, 0).x == doctest::Approx(1.0));
    CHECK(img.at(1, 0).y == doctest::Approx(1.0));
}

TEST_CASE("camera ray through the principal point looks down -z") {
    CameraModel cam;
    cam.width = cam.height = 101;
    cam.fx = cam.fy = 100.0;
    cam.cx = cam.cy = 50.5;
    Ray r = cam.pixel_ray(50, 50);  // center (50.5, 50.5) = principal point
    CHECK(r.dir.x == doctest::Approx(0.0));
    CHECK(r.dir.y == doctest::Approx(0.0));
    CHECK(r.dir.z == doctest::Approx(-1.0));
}

TEST_CASE("camera ray matches the 2x2 worked example") {
    CameraModel cam;
    cam.width = cam.height = 2;
    cam.fx = cam.fy = 1.0;
    cam.cx = cam.cy = 1.0;
    Ray r = cam.pixel_ray(0, 0);
    Vec3 expected = normalize(Vec3{-0.5, 0.5, -1.0});
    CHECK(r.dir.x == doctest::Approx(expected.x));
    CHECK(r.dir.y == doctest::Approx(expected.y));
    CHECK(r.dir.z == doctest::Approx(expected.z));
    CHECK(norm(r.dir) == doctest::Approx(1.0));
}

TEST_CASE("project inverts pixel_ray") {
    CameraModel cam = CameraModel::look_at({2, 1, 3}, {0, 0, 0}, {0, 0, 1}, 64, 48, 0.9);
    cam.validate();
    for (int iy : {0, 10, 47})
        for (int ix : {0, 31, 63}) {
            Ray r = cam.pixel_ray(ix, iy);
            Vec3 p = r.at(2.5);
            double u, v, depth;
            REQUIRE(cam.project(p, u, v, depth));
            CHECK(u == doctest::Approx(ix + 0.5).epsilon(1e-9));
            CHECK(v == doctest::Approx(iy + 0.5).epsilon(1e-9));
            CHECK(depth > 0.0);
        }
    // Point behind the camera does not project.
    Vec3 behind = cam.position() + cam.cam_to_world.rotation_col(2) * 1.0;
    double u, v, d;
    CHECK_FALSE(cam.project(behind, u, v, d));
}

TEST_CASE("camera validation rejects bad poses") {
    CameraModel cam = CameraModel::look_at({3, 0, 0}, {0, 0, 0}, {0, 0, 1}, 8, 8, 0.8);
    CHECK_NOTHROW(cam.validate());
    cam.cam_to_world.m[0][0] = 5.0;
    CHECK_THROWS_AS(cam.validate(), InputError);
    CameraModel bad;
    bad.width = 0;
    CHECK_THROWS_AS(bad.validate(), InputError);
}
