#include <cstring>
#include <vector>

#include "doctest.h"
#include "qgs/kernels.hpp"
#include "qgs/rng.hpp"

using namespace qgs;

namespace {

std::vector<double> random_vec(Rng& rng, size_t n, double lo = -2.0, double hi = 2.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

}  // namespace

#if defined(__x86_64__) || defined(_M_X64)

TEST_CASE("avx2 reductions are bit-identical to scalar") {
    if (!kernels::avx2_supported()) return;
    Rng rng(11);
    for (size_t n : {size_t(0), size_t(1), size_t(3), size_t(4), size_t(7), size_t(64),
                     size_t(191), size_t(4096)}) {
        const auto a = random_vec(rng, n);
        const auto b = random_vec(rng, n);
        CHECK(kernels::kScalar.reduce_abs_diff(a.data(), b.data(), n) ==
              kernels::kAvx2.reduce_abs_diff(a.data(), b.data(), n));
        CHECK(kernels::kScalar.reduce_sq_diff(a.data(), b.data(), n) ==
              kernels::kAvx2.reduce_sq_diff(a.data(), b.data(), n));
    }
}

TEST_CASE("avx2 11-tap convolutions are bit-identical to scalar") {
    if (!kernels::avx2_supported()) return;
    Rng rng(12);
    double taps[11];
    double s = 0.0;
    for (double& t : taps) { t = rng.uniform(0.0, 1.0); s += t; }
    for (double& t : taps) t /= s;

    for (auto [w, h] : {std::pair{8, 8}, {11, 5}, {64, 64}, {3, 17}, {37, 2}}) {
        const auto src = random_vec(rng, size_t(w) * h);
        std::vector<double> out_s(src.size()), out_v(src.size());
        kernels::kScalar.conv11_h(src.data(), out_s.data(), w, h, taps);
        kernels::kAvx2.conv11_h(src.data(), out_v.data(), w, h, taps);
        CHECK(std::memcmp(out_s.data(), out_v.data(), src.size() * 8) == 0);
        kernels::kScalar.conv11_v(src.data(), out_s.data(), w, h, taps);
        kernels::kAvx2.conv11_v(src.data(), out_v.data(), w, h, taps);
        CHECK(std::memcmp(out_s.data(), out_v.data(), src.size() * 8) == 0);
    }
}

TEST_CASE("avx2 splat quadratic row is bit-identical to scalar") {
    if (!kernels::avx2_supported()) return;
    Rng rng(13);
    for (int n : {1, 3, 4, 9, 64, 101}) {
        const double ca = rng.uniform(0.01, 2.0);
        const double cb = rng.uniform(-0.5, 0.5);
        const double cc = rng.uniform(0.01, 2.0);
        const double dx0 = rng.uniform(-30.0, 5.0);
        const double dy = rng.uniform(-20.0, 20.0);
        std::vector<double> qs(static_cast<size_t>(n));
        std::vector<double> qv(static_cast<size_t>(n));
        kernels::kScalar.splat_quad_row(ca, cb, cc, dx0, dy, qs.data(), n);
        kernels::kAvx2.splat_quad_row(ca, cb, cc, dx0, dy, qv.data(), n);
        CHECK(std::memcmp(qs.data(), qv.data(), size_t(n) * 8) == 0);
    }
}

#endif  // x86_64

TEST_CASE("scalar conv11 matches a direct zero-padded reference") {
    Rng rng(14);
    const int w = 13, h = 9;
    const auto src = random_vec(rng, size_t(w) * h);
    double taps[11];
    for (double& t : taps) t = rng.uniform(-1.0, 1.0);
    std::vector<double> out(src.size());
    kernels::kScalar.conv11_h(src.data(), out.data(), w, h, taps);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = 0; k < 11; ++k) {
                const int xx = x + k - 5;
                if (xx >= 0 && xx < w) acc += taps[k] * src[size_t(y) * w + size_t(xx)];
            }
            CHECK(out[size_t(y) * w + size_t(x)] == doctest::Approx(acc).epsilon(1e-14));
        }
}

TEST_CASE("kernel selection honors overrides") {
    CHECK(kernels::set_active("scalar"));
    CHECK(std::string(kernels::active().name) == "scalar");
    if (kernels::avx2_supported()) {
        CHECK(kernels::set_active("avx2"));
        CHECK(std::string(kernels::active().name) == "avx2");
    }
    CHECK_FALSE(kernels::set_active("no-such-kernel"));
}
