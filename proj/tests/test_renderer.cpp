#include <cmath>
#include <vector>

#include "doctest.h"
#include "qgs/metrics.hpp"
#include "qgs/renderer.hpp"
#include "qgs/rng.hpp"

using namespace qgs;

namespace {

Camera test_camera(int size = 8, double dist = 3.0) {
    return Camera::look_at({0, 0, -dist}, {0, 0, 0}, {0, 1, 0}, 45.0 * 3.14159265358979 / 180.0,
                           size, size);
}

Gaussian make_gaussian(Vec3 mu, double scale, double alpha, Vec3 rgb) {
    Gaussian g;
    g.mu = mu;
    g.rot = Quat{1, 0, 0, 0};
    g.log_scale = {std::log(scale), std::log(scale), std::log(scale)};
    g.opacity_logit = std::log(alpha / (1.0 - alpha));
    // degree-0 color: c = clamp01(a0 * Y0 + 0.5)
    for (int ch = 0; ch < 3; ++ch) g.sh[size_t(ch) * 16] = ((&rgb.x)[ch] - 0.5) / 0.28209479177387814;
    return g;
}

Scene two_gaussian_scene() {
    Scene s;
    Gaussian a = make_gaussian({-0.15, 0.1, 0.0}, 0.65, 0.62, {0.68, 0.41, 0.35});
    Gaussian b = make_gaussian({0.2, -0.05, 0.4}, 0.7, 0.55, {0.3, 0.55, 0.66});
    a.rot = Quat{0.9, 0.2, -0.3, 0.1};
    b.rot = Quat{0.8, -0.1, 0.4, 0.2};
    a.log_scale = {std::log(0.62), std::log(0.75), std::log(0.58)};
    b.log_scale = {std::log(0.7), std::log(0.6), std::log(0.8)};
    Rng rng(61);
    for (auto* g : {&a, &b})
        for (int k = 0; k < 48; ++k)
            if (k % 16 != 0) g->sh[size_t(k)] = rng.uniform(-0.08, 0.08);
    s.gaussians = {a, b};
    return s;
}

}  // namespace

TEST_CASE("empty scene renders background with unit transmittance") {
    Scene s;
    const Camera cam = test_camera(8);
    RenderOptions opt;
    const RenderResult r = render(s, cam, opt);
    for (double v : r.rgb.px) CHECK(v == 0.0);
    for (double t : r.transmittance) CHECK(t == 1.0);
}

TEST_CASE("on-axis isotropic projection") {
    Gaussian g = make_gaussian({0, 0, 0}, 0.5, 0.9, {0.5, 0.5, 0.5});
    const Camera cam = test_camera(8, 3.0);
    const auto p = project_gaussian(g, cam);
    REQUIRE(p.has_value());
    CHECK(p->depth == doctest::Approx(3.0));
    CHECK(p->mean.x == doctest::Approx(4.0));
    CHECK(p->mean.y == doctest::Approx(4.0));
    const double expect = (cam.fx / 3.0) * (cam.fx / 3.0) * 0.25 + 0.3;
    CHECK(p->cov_xx == doctest::Approx(expect).epsilon(1e-9));
    CHECK(p->cov_yy == doctest::Approx(expect).epsilon(1e-9));
    CHECK(p->cov_xy == doctest::Approx(0.0).epsilon(1e-12));

    // doubling the depth halves the projected standard deviation (pre-floor)
    const Camera cam2 = test_camera(8, 6.0);
    const auto p2 = project_gaussian(g, cam2);
    REQUIRE(p2.has_value());
    CHECK(std::sqrt(p2->cov_xx - 0.3) ==
          doctest::Approx(0.5 * std::sqrt(p->cov_xx - 0.3)).epsilon(1e-9));
}

TEST_CASE("behind-camera gaussians are skipped") {
    Gaussian g = make_gaussian({0, 0, -10}, 0.5, 0.9, {0.5, 0.5, 0.5});
    const Camera cam = test_camera(8, 3.0);  // eye at z=-3 looking toward +z
    CHECK_FALSE(project_gaussian(g, cam).has_value());
}

TEST_CASE("projected covariance matches a numerical Jacobian") {
    Rng rng(62);
    for (int trial = 0; trial < 10; ++trial) {
        Gaussian g;
        g.mu = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.3, 0.3)};
        g.rot = rng.unit_quat();
        g.log_scale = {rng.uniform(-2.0, -1.0), rng.uniform(-2.0, -1.0), rng.uniform(-2.0, -1.0)};
        g.opacity_logit = 0.0;
        const Camera cam = test_camera(16, 3.0);

        // numerical Jacobian of world -> pixel at mu
        auto proj_pix = [&](Vec3 p) {
            const Vec3 t = cam.world_to_cam * (p - cam.position);
            return Vec2{cam.fx * t.x / t.z + cam.cx, cam.fy * t.y / t.z + cam.cy};
        };
        const double h = 1e-6;
        double Jn[2][3];
        for (int c = 0; c < 3; ++c) {
            Vec3 pp = g.mu, pm = g.mu;
            pp[c] += h;
            pm[c] -= h;
            const Vec2 a = proj_pix(pp), b = proj_pix(pm);
            Jn[0][c] = (a.x - b.x) / (2 * h);
            Jn[1][c] = (a.y - b.y) / (2 * h);
        }
        // Sigma3
        const Mat3 R = quat_to_mat(g.rot);
        const Vec3 sc{std::exp(g.log_scale.x), std::exp(g.log_scale.y), std::exp(g.log_scale.z)};
        Mat3 RS = R;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) RS(r, c) *= (&sc.x)[c];
        const Mat3 S3 = RS * transposed(RS);
        double cov_oracle[2][2] = {{0.3, 0.0}, {0.0, 0.3}};
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c)
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j) cov_oracle[r][c] += Jn[r][i] * S3(i, j) * Jn[c][j];

        const auto p = project_gaussian(g, cam);
        REQUIRE(p.has_value());
        CHECK(p->cov_xx == doctest::Approx(cov_oracle[0][0]).epsilon(1e-4));
        CHECK(p->cov_xy == doctest::Approx(cov_oracle[0][1]).epsilon(1e-4));
        CHECK(p->cov_yy == doctest::Approx(cov_oracle[1][1]).epsilon(1e-4));
    }
}

TEST_CASE("single opaque on-axis splat shows its color at center and falls off") {
    Scene s;
    s.gaussians.push_back(make_gaussian({0, 0, 0}, 0.2, 0.995, {0.8, 0.3, 0.2}));
    const Camera cam = test_camera(17, 3.0);
    RenderOptions opt;
    const RenderResult r = render(s, cam, opt);
    const double* center = r.rgb.at(8, 8);
    CHECK(center[0] == doctest::Approx(0.8).epsilon(0.01));
    CHECK(center[1] == doctest::Approx(0.3).epsilon(0.02));
    const double* edge = r.rgb.at(0, 8);
    CHECK(edge[0] < center[0]);
}

TEST_CASE("identity modulation equals the unmodulated render exactly") {
    const Scene s = two_gaussian_scene();
    const Camera cam = test_camera(16);
    RenderOptions plain;
    const RenderResult base = render(s, cam, plain);

    for (ModulationMode mode : {ModulationMode::Full, ModulationMode::OnlyOpacity,
                                ModulationMode::OnlySh}) {
        RenderOptions opt;
        opt.mode = mode;
        ModulationFactors f(s.gaussians.size(),
                            std::vector<double>(static_cast<size_t>(modulation_n_out(mode)), 1.0));
        const RenderResult mod = render(s, cam, opt, &f);
        CHECK(mod.rgb.px == base.rgb.px);
        CHECK(mod.transmittance == base.transmittance);
    }
}

TEST_CASE("renders are bit-identical across thread counts") {
    const Scene s = two_gaussian_scene();
    const Camera cam = test_camera(32);
    RenderOptions a, b;
    a.threads = 1;
    b.threads = 4;
    const RenderResult ra = render(s, cam, a);
    const RenderResult rb = render(s, cam, b);
    CHECK(ra.rgb.px == rb.rgb.px);

    Image w(cam.width, cam.height);
    Rng rng(63);
    for (double& v : w.px) v = rng.uniform(-1.0, 1.0);
    const auto ga = render_backward(s, cam, a, nullptr, w);
    const auto gb = render_backward(s, cam, b, nullptr, w);
    for (size_t i = 0; i < ga.size(); ++i) {
        CHECK(ga[i].d_mu.x == gb[i].d_mu.x);
        CHECK(ga[i].d_sh == gb[i].d_sh);
        CHECK(ga[i].d_opacity_logit == gb[i].d_opacity_logit);
    }
}

TEST_CASE("per-pixel composited weight never exceeds one") {
    const Scene s = two_gaussian_scene();
    const Camera cam = test_camera(16);
    RenderOptions opt;
    const RenderResult r = render(s, cam, opt);
    for (double t : r.transmittance) {
        CHECK(t >= 0.0);
        CHECK(t <= 1.0);
    }
}

TEST_CASE("backward matches finite differences on every attribute") {
    const Scene s = two_gaussian_scene();
    const Camera cam = test_camera(8);
    RenderOptions opt;
    opt.mode = ModulationMode::Full;
    Rng rng(64);
    ModulationFactors f(s.gaussians.size(), std::vector<double>(49));
    for (auto& fg : f)
        for (double& v : fg) v = rng.uniform(0.8, 1.2);

    Image w(cam.width, cam.height);
    for (double& v : w.px) v = rng.uniform(-1.0, 1.0);

    auto objective = [&](const Scene& sc, const ModulationFactors& fc) {
        const RenderResult r = render(sc, cam, opt, &fc);
        double acc = 0.0;
        for (size_t i = 0; i < r.rgb.px.size(); ++i) acc += w.px[i] * r.rgb.px[i];
        return acc;
    };

    const auto grads = render_backward(s, cam, opt, &f, w);
    const double h = 1e-5;
    auto check = [&](double analytic, double fd, const char* what) {
        const double denom = std::max({std::fabs(fd), std::fabs(analytic), 1e-4});
        INFO(what, " analytic=", analytic, " fd=", fd);
        CHECK(std::fabs(analytic - fd) / denom < 2e-3);
    };

    for (size_t gi = 0; gi < s.gaussians.size(); ++gi) {
        for (int c = 0; c < 3; ++c) {
            Scene sp = s, sm = s;
            sp.gaussians[gi].mu[c] += h;
            sm.gaussians[gi].mu[c] -= h;
            check(grads[gi].d_mu[c], (objective(sp, f) - objective(sm, f)) / (2 * h), "mu");
        }
        for (int c = 0; c < 4; ++c) {
            Scene sp = s, sm = s;
            (&sp.gaussians[gi].rot.w)[c] += h;
            (&sm.gaussians[gi].rot.w)[c] -= h;
            check(grads[gi].d_rot[size_t(c)], (objective(sp, f) - objective(sm, f)) / (2 * h),
                  "rot");
        }
        for (int c = 0; c < 3; ++c) {
            Scene sp = s, sm = s;
            sp.gaussians[gi].log_scale[c] += h;
            sm.gaussians[gi].log_scale[c] -= h;
            check(grads[gi].d_log_scale[c], (objective(sp, f) - objective(sm, f)) / (2 * h),
                  "scale");
        }
        {
            Scene sp = s, sm = s;
            sp.gaussians[gi].opacity_logit += h;
            sm.gaussians[gi].opacity_logit -= h;
            check(grads[gi].d_opacity_logit, (objective(sp, f) - objective(sm, f)) / (2 * h),
                  "opacity");
        }
        for (int k = 0; k < 48; k += 5) {
            Scene sp = s, sm = s;
            sp.gaussians[gi].sh[size_t(k)] += h;
            sm.gaussians[gi].sh[size_t(k)] -= h;
            check(grads[gi].d_sh[size_t(k)], (objective(sp, f) - objective(sm, f)) / (2 * h),
                  "sh");
        }
        for (int k = 0; k < 49; k += 7) {
            ModulationFactors fp = f, fm = f;
            fp[gi][size_t(k)] += h;
            fm[gi][size_t(k)] -= h;
            check(grads[gi].d_factors[size_t(k)], (objective(s, fp) - objective(s, fm)) / (2 * h),
                  "factor");
        }
    }
}

TEST_CASE("degenerate splats are skipped instead of poisoning the image") {
    Scene s;
    Gaussian g = make_gaussian({0, 0, 0}, 1.0, 0.9, {0.7, 0.7, 0.7});
    g.log_scale = {-40.0, -40.0, -40.0};  // collapses the 2D covariance
    s.gaussians.push_back(g);
    const Camera cam = test_camera(8);
    const RenderResult r = render(s, cam, RenderOptions{});
    for (double v : r.rgb.px) CHECK(std::isfinite(v));
}

TEST_CASE("no_sh mode uses degree zero and rgb factors") {
    Scene s;
    s.gaussians.push_back(make_gaussian({0, 0, 0}, 0.2, 0.995, {0.6, 0.6, 0.6}));
    // degree-3 coefficients must be ignored in no_sh mode
    s.gaussians[0].sh[5] = 5.0;
    const Camera cam = test_camera(9, 3.0);
    RenderOptions opt;
    opt.mode = ModulationMode::NoSh;
    ModulationFactors f{{1.2, 0.9, 0.5, 1.0}};
    const RenderResult r = render(s, cam, opt, &f);
    const double* c = r.rgb.at(4, 4);
    CHECK(c[0] == doctest::Approx(0.6 * 1.2).epsilon(0.01));
    CHECK(c[1] == doctest::Approx(0.6 * 0.9).epsilon(0.01));
    CHECK(c[2] == doctest::Approx(0.6 * 0.5).epsilon(0.01));
}
