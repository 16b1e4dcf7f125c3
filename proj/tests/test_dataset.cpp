#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "qgs/dataset.hpp"
#include "qgs/rng.hpp"

using namespace qgs;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("step lobe cap of half-angle 90 at +z is the upper-hemisphere indicator") {
    const DirectionalTarget t = make_step_lobe({0, 0, 1}, kPi / 2);
    Rng rng(101);
    for (int i = 0; i < 200; ++i) {
        const Vec3 d = rng.unit_vector();
        const Vec3 v = t.eval(d);
        if (d.z > 1e-12) CHECK(v.x == 1.0);
        if (d.z < -1e-12) CHECK(v.x == 0.0);
    }
}

TEST_CASE("constant sh_smooth target is uniform over the sphere") {
    DirectionalTarget t;
    t.kind = TargetKind::ShSmooth;
    t.sh.fill(0.0);
    t.sh[0] = 0.7;  // red DC only
    Rng rng(102);
    const Vec3 ref = t.eval(rng.unit_vector());
    for (int i = 0; i < 20; ++i) {
        const Vec3 v = t.eval(rng.unit_vector());
        CHECK(v.x == doctest::Approx(ref.x).epsilon(1e-12));
        CHECK(v.y == 0.5);
    }
}

TEST_CASE("specular spot follows the exponential lobe") {
    const DirectionalTarget t = make_specular_spot({0, 0, 1}, 100.0);
    CHECK(t.eval({0, 0, 1}).x == doctest::Approx(1.0));
    const double ang = 0.2;
    const Vec3 d{std::sin(ang), 0, std::cos(ang)};
    CHECK(t.eval(d).x == doctest::Approx(std::exp(100.0 * (std::cos(ang) - 1.0))).epsilon(1e-9));
}

TEST_CASE("generation is a pure function of seed and parameters") {
    const Dataset a = generate_scene(4, TargetKind::StepLobe, 77, 6, 24);
    const Dataset b = generate_scene(4, TargetKind::StepLobe, 77, 6, 24);
    REQUIRE(a.targets.size() == b.targets.size());
    for (size_t i = 0; i < a.targets.size(); ++i) CHECK(a.targets[i].px == b.targets[i].px);
    for (size_t i = 0; i < a.scene.gaussians.size(); ++i)
        CHECK(a.scene.gaussians[i].mu.x == b.scene.gaussians[i].mu.x);

    const Dataset c = generate_scene(4, TargetKind::StepLobe, 78, 6, 24);
    bool differ = false;
    for (size_t i = 0; i < a.targets.size(); ++i) differ |= a.targets[i].px != c.targets[i].px;
    CHECK(differ);
}

TEST_CASE("camera ring sits at 30 degrees elevation and radius 4x extent") {
    const Dataset ds = generate_scene(2, TargetKind::ShSmooth, 5, 8, 16);
    REQUIRE(ds.cameras.size() == 8);
    const double extent = length(Vec3{0.5, 0.5, 0.5});
    for (const Camera& c : ds.cameras) {
        CHECK(length(c.position) == doctest::Approx(4.0 * extent).epsilon(1e-9));
        const double elev = std::asin(c.position.z / length(c.position));
        CHECK(elev == doctest::Approx(30.0 * kPi / 180.0).epsilon(1e-9));
    }
}

TEST_CASE("dataset round trips through the directory layout") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "qgs_ds_roundtrip";
    fs::remove_all(dir);
    const Dataset ds = generate_scene(3, TargetKind::SpecularSpot, 11, 5, 20);
    save_dataset(ds, dir.string());
    const Dataset back = load_dataset(dir.string());

    CHECK(back.kind == ds.kind);
    CHECK(back.seed == ds.seed);
    REQUIRE(back.targets.size() == ds.targets.size());
    for (size_t i = 0; i < ds.targets.size(); ++i) CHECK(back.targets[i].px == ds.targets[i].px);
    REQUIRE(back.cameras.size() == ds.cameras.size());
    for (size_t i = 0; i < ds.cameras.size(); ++i) {
        CHECK(back.cameras[i].position.x == ds.cameras[i].position.x);
        CHECK(back.cameras[i].fx == ds.cameras[i].fx);
    }
    REQUIRE(back.responses.size() == ds.responses.size());
    for (size_t i = 0; i < ds.responses.size(); ++i) {
        CHECK(back.responses[i].axis.x == ds.responses[i].axis.x);
        CHECK(back.responses[i].cos_cap == ds.responses[i].cos_cap);
    }

    // a second save of the loaded dataset is byte-identical
    const fs::path dir2 = fs::temp_directory_path() / "qgs_ds_roundtrip2";
    fs::remove_all(dir2);
    save_dataset(back, dir2.string());
    CHECK(file_bytes(dir / "scene.qgs") == file_bytes(dir2 / "scene.qgs"));
    CHECK(file_bytes(dir / "cameras.qgcam") == file_bytes(dir2 / "cameras.qgcam"));
    CHECK(file_bytes(dir / "targets/view_000.ppm") == file_bytes(dir2 / "targets/view_000.ppm"));
    fs::remove_all(dir);
    fs::remove_all(dir2);
}

TEST_CASE("the canonical training dataset reproduces its pinned checksum") {
    // golden value frozen from the first build on the reference toolchain;
    // guards both the generator stream and the rasterizer output
    const Dataset ds = generate_scene(8, TargetKind::StepLobe, 101, 16, 64);
    uint64_t h = 1469598103934665603ull;
    auto mix = [&](const void* data, size_t n) {
        const unsigned char* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    for (const Gaussian& g : ds.scene.gaussians) mix(&g.mu, sizeof g.mu);
    for (const Image& img : ds.targets)
        for (double v : img.px) {
            const unsigned char b = static_cast<unsigned char>(v * 255.0 + 0.5);
            mix(&b, 1);
        }
    CHECK(h == 0x361608c2395710f6ull);
}

TEST_CASE("target views rasterize the analytic colors") {
    Dataset ds = generate_scene(1, TargetKind::StepLobe, 13, 4, 33);
    // make the single gaussian opaque and centered so the center pixel shows it
    ds.scene.gaussians[0].mu = {0, 0, 0};
    ds.scene.gaussians[0].opacity_logit = 6.0;
    const Camera& cam = ds.cameras[0];
    const Image img = render_target_view(ds.scene, ds.responses, cam);
    const Vec3 d = normalized(ds.scene.gaussians[0].mu - cam.position);
    const Vec3 expect = ds.responses[0].eval(d);
    const double* px = img.at(16, 16);
    CHECK(px[0] == doctest::Approx(expect.x).epsilon(0.02));
    CHECK(px[1] == doctest::Approx(expect.y).epsilon(0.02));
}
