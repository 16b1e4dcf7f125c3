#include <array>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "qgs/rng.hpp"
#include "qgs/sh.hpp"

using namespace qgs;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Independent oracle: real spherical harmonics from the associated Legendre
// recurrence with explicit normalization, Condon-Shortley applied as (-1)^m.
double legendre_pmm(int m, double s) {  // P_m^m(cos t) with s = sin t, no CS phase
    double p = 1.0;
    for (int k = 1; k <= m; ++k) p *= (2 * k - 1) * s;
    return p;
}

double legendre(int l, int m, double c, double s) {
    double pmm = legendre_pmm(m, s);
    if (l == m) return pmm;
    double pm1 = c * (2 * m + 1) * pmm;
    if (l == m + 1) return pm1;
    for (int ll = m + 2; ll <= l; ++ll) {
        const double p = (c * (2 * ll - 1) * pm1 - (ll + m - 1) * pmm) / (ll - m);
        pmm = pm1;
        pm1 = p;
    }
    return pm1;
}

double factorial(int n) {
    double f = 1.0;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
}

double oracle_sh(int l, int m, Vec3 d) {
    const double c = d.z;
    const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    const double phi = std::atan2(d.y, d.x);
    const int am = std::abs(m);
    const double K = std::sqrt((2 * l + 1) / (4.0 * kPi) * factorial(l - am) / factorial(l + am));
    const double P = legendre(l, am, c, s);
    const double cs = (am % 2 == 0) ? 1.0 : -1.0;  // Condon-Shortley
    if (m == 0) return K * P;
    if (m > 0) return cs * std::sqrt(2.0) * K * std::cos(am * phi) * P;
    return cs * std::sqrt(2.0) * K * std::sin(am * phi) * P;
}

}  // namespace

TEST_CASE("basis matches the Legendre-recurrence oracle") {
    Rng rng(51);
    const int lm[16][2] = {{0, 0},  {1, -1}, {1, 0},  {1, 1},  {2, -2}, {2, -1}, {2, 0},  {2, 1},
                           {2, 2},  {3, -3}, {3, -2}, {3, -1}, {3, 0},  {3, 1},  {3, 2},  {3, 3}};
    for (int trial = 0; trial < 100; ++trial) {
        const Vec3 d = rng.unit_vector();
        const auto b = sh_basis(d);
        for (int k = 0; k < 16; ++k) {
            const double o = oracle_sh(lm[k][0], lm[k][1], d);
            CHECK(std::fabs(b[size_t(k)] - o) < 1e-12);
        }
    }
}

TEST_CASE("constant coefficient gives a constant color") {
    std::vector<double> sh(48, 0.0);
    const double k = 0.8;
    sh[0] = sh[16] = sh[32] = k;
    Rng rng(52);
    for (int i = 0; i < 20; ++i) {
        const Vec3 c = eval_sh(sh, rng.unit_vector());
        for (int ch = 0; ch < 3; ++ch)
            CHECK(c[ch] == doctest::Approx(clamp01(k * 0.2820947918 + 0.5)).epsilon(1e-9));
    }
}

TEST_CASE("all-zero coefficients give mid gray") {
    std::vector<double> sh(48, 0.0);
    const Vec3 c = eval_sh(sh, {0.3, -0.4, std::sqrt(1 - 0.25)});
    CHECK(c.x == 0.5);
    CHECK(c.y == 0.5);
    CHECK(c.z == 0.5);
}

TEST_CASE("degree-1 z coefficient is linear in d_z") {
    std::vector<double> sh(48, 0.0);
    sh[2] = 0.4;  // red channel, (l,m) = (1,0)
    Rng rng(53);
    for (int i = 0; i < 20; ++i) {
        const Vec3 d = rng.unit_vector();
        const Vec3 c = eval_sh(sh, d);
        CHECK(c.x == doctest::Approx(clamp01(0.5 + 0.4 * 0.4886025119029199 * d.z)).epsilon(1e-12));
        CHECK(c.y == 0.5);
    }
}

TEST_CASE("backward matches finite differences for coefficients and direction") {
    Rng rng(54);
    std::vector<double> sh(48);
    for (double& v : sh) v = rng.uniform(-0.15, 0.15);  // keep channels unclamped
    const Vec3 d = rng.unit_vector();
    const Vec3 up{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};

    std::vector<double> dsh(48, 0.0);
    const Vec3 dd = eval_sh_backward(sh, d, up, dsh);

    auto objective = [&](const std::vector<double>& shv, Vec3 dir) {
        const Vec3 c = eval_sh(shv, dir);
        return up.x * c.x + up.y * c.y + up.z * c.z;
    };
    const double h = 1e-6;
    for (int k = 0; k < 48; ++k) {
        auto sp = sh, sm = sh;
        sp[size_t(k)] += h;
        sm[size_t(k)] -= h;
        const double fd = (objective(sp, d) - objective(sm, d)) / (2 * h);
        CHECK(dsh[size_t(k)] == doctest::Approx(fd).epsilon(1e-6));
    }
    // free-coordinate derivative of the un-normalized direction
    for (int i = 0; i < 3; ++i) {
        Vec3 dp = d, dm = d;
        dp[i] += h;
        dm[i] -= h;
        const double fd = (objective(sh, dp) - objective(sh, dm)) / (2 * h);
        CHECK(dd[i] == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("clamped channels pass no gradient") {
    std::vector<double> sh(48, 0.0);
    sh[0] = 10.0;  // red saturates at 1
    std::vector<double> dsh(48, 0.0);
    const Vec3 dd = eval_sh_backward(sh, {0, 0, 1}, {1.0, 0.0, 0.0}, dsh);
    for (double v : dsh) CHECK(v == 0.0);
    CHECK(dd.x == 0.0);
}
