#include <cmath>
#include <vector>

#include "doctest.h"
#include "qgs/hashgrid.hpp"
#include "qgs/rng.hpp"

using namespace qgs;

namespace {

HashGridConfig small_config() {
    HashGridConfig c;
    c.num_levels = 4;
    c.features_per_level = 2;
    c.table_size = 1u << 10;
    c.base_resolution = 4;
    c.max_resolution = 16;
    c.bounds_lo = {-1, -1, -1};
    c.bounds_hi = {1, 1, 1};
    return c;
}

}  // namespace

TEST_CASE("grid level progression") {
    HashGridConfig c;
    c.num_levels = 1;
    c.base_resolution = 16;
    c.max_resolution = 16;
    CHECK(grid_levels(c) == std::vector<int>{16});

    c.num_levels = 3;
    c.base_resolution = 2;
    c.max_resolution = 8;
    CHECK(grid_levels(c) == std::vector<int>{2, 4, 8});

    c.num_levels = 16;
    c.base_resolution = 16;
    c.max_resolution = 512;
    const auto r = grid_levels(c);
    CHECK(r.front() == 16);
    CHECK(r.back() == 512);
    const double b = std::exp(std::log(512.0 / 16.0) / 15.0);
    for (int l = 0; l < 16; ++l) {
        CHECK(r[size_t(l)] <= int(16.0 * std::pow(b, l)) + 1);
        CHECK(r[size_t(l)] >= int(16.0 * std::pow(b, l)) - 1);
        if (l > 0) CHECK(r[size_t(l)] >= r[size_t(l) - 1]);
    }
}

TEST_CASE("output dimension and determinism") {
    Rng rng(31);
    HashGrid grid(small_config());
    grid.init_uniform(rng);
    std::vector<double> f1(static_cast<size_t>(grid.config().output_dim()));
    std::vector<double> f2(f1.size());
    const Vec3 p{0.3, -0.2, 0.7};
    grid.encode(p, f1);
    grid.encode(p, f2);
    CHECK(f1 == f2);
    CHECK(f1.size() == size_t(4 * 2));
}

TEST_CASE("corner and cell-center interpolation weights") {
    HashGridConfig c = small_config();
    c.num_levels = 1;
    c.base_resolution = 4;
    c.max_resolution = 4;
    c.bounds_lo = {0, 0, 0};
    c.bounds_hi = {1, 1, 1};
    HashGrid grid(c);
    Rng rng(32);
    grid.init_uniform(rng, -1.0, 1.0);

    // exactly on a corner: feature is that corner's table entry
    const Vec3 corner{0.25, 0.5, 0.75};  // integer cell corner at resolution 4
    std::vector<double> f(2);
    grid.encode(corner, f);
    const uint32_t idx = grid.corner_index(0, 1, 2, 3);
    CHECK(f[0] == doctest::Approx(grid.table()[size_t(idx) * 2]).epsilon(1e-12));
    CHECK(f[1] == doctest::Approx(grid.table()[size_t(idx) * 2 + 1]).epsilon(1e-12));

    // at a voxel center: mean of the 8 corner features
    const Vec3 center{0.125, 0.125, 0.125};
    grid.encode(center, f);
    double mean0 = 0.0, mean1 = 0.0;
    for (int corner_id = 0; corner_id < 8; ++corner_id) {
        const uint32_t ci = grid.corner_index(0, corner_id & 1, (corner_id >> 1) & 1,
                                              (corner_id >> 2) & 1);
        mean0 += grid.table()[size_t(ci) * 2] / 8.0;
        mean1 += grid.table()[size_t(ci) * 2 + 1] / 8.0;
    }
    CHECK(f[0] == doctest::Approx(mean0).epsilon(1e-12));
    CHECK(f[1] == doctest::Approx(mean1).epsilon(1e-12));
}

TEST_CASE("continuity across cell boundaries") {
    Rng rng(33);
    HashGrid grid(small_config());
    grid.init_uniform(rng, -1.0, 1.0);
    const int dim = grid.config().output_dim();
    std::vector<double> fa(static_cast<size_t>(dim)), fb(static_cast<size_t>(dim));
    for (int trial = 0; trial < 50; ++trial) {
        const Vec3 p{rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9)};
        const double eps = 1e-9;
        grid.encode(p, fa);
        grid.encode({p.x + eps, p.y, p.z}, fb);
        for (int i = 0; i < dim; ++i) CHECK(std::fabs(fa[size_t(i)] - fb[size_t(i)]) < 1e-6);
    }
}

TEST_CASE("table gradients match finite differences") {
    Rng rng(34);
    HashGrid grid(small_config());
    grid.init_uniform(rng, -1.0, 1.0);
    const int dim = grid.config().output_dim();
    const Vec3 p{0.37, -0.21, 0.55};

    std::vector<double> up(static_cast<size_t>(dim));
    for (double& u : up) u = rng.uniform(-1.0, 1.0);
    std::vector<double> tg(grid.table().size(), 0.0);
    grid.encode_backward(p, up, tg);

    std::vector<double> f(static_cast<size_t>(dim));
    auto objective = [&]() {
        grid.encode(p, f);
        double s = 0.0;
        for (int i = 0; i < dim; ++i) s += up[size_t(i)] * f[size_t(i)];
        return s;
    };
    const double h = 1e-6;
    int checked = 0;
    for (size_t k = 0; k < grid.table().size() && checked < 64; ++k) {
        if (tg[k] == 0.0) continue;
        const double orig = grid.table()[k];
        grid.table()[k] = orig + h;
        const double fp = objective();
        grid.table()[k] = orig - h;
        const double fm = objective();
        grid.table()[k] = orig;
        const double fd = (fp - fm) / (2 * h);
        CHECK(std::fabs(fd - tg[k]) / std::max({std::fabs(fd), std::fabs(tg[k]), 1e-6}) < 1e-6);
        ++checked;
    }
    CHECK(checked > 0);
}

TEST_CASE("positional gradient matches finite differences") {
    Rng rng(35);
    HashGrid grid(small_config());
    grid.init_uniform(rng, -1.0, 1.0);
    const int dim = grid.config().output_dim();
    std::vector<double> up(static_cast<size_t>(dim));
    for (double& u : up) u = rng.uniform(-1.0, 1.0);
    std::vector<double> f(static_cast<size_t>(dim));
    auto objective = [&](Vec3 q) {
        grid.encode(q, f);
        double s = 0.0;
        for (int i = 0; i < dim; ++i) s += up[size_t(i)] * f[size_t(i)];
        return s;
    };
    // probe points chosen away from cell faces at every level
    const Vec3 p{0.3712, -0.2141, 0.5523};
    std::vector<double> tg(grid.table().size(), 0.0);
    const Vec3 dp = grid.encode_backward(p, up, tg);
    const double h = 1e-7;
    for (int i = 0; i < 3; ++i) {
        Vec3 a = p, b = p;
        a[i] += h;
        b[i] -= h;
        const double fd = (objective(a) - objective(b)) / (2 * h);
        CHECK(std::fabs(fd - dp[i]) / std::max({std::fabs(fd), std::fabs(dp[i]), 1e-6}) < 1e-5);
    }
}

TEST_CASE("directional encoding remaps [-1,1] to bounds") {
    HashGridConfig c = small_config();
    c.bounds_lo = {0, 0, 0};
    c.bounds_hi = {1, 1, 1};
    HashGrid grid(c);
    Rng rng(36);
    grid.init_uniform(rng, -1.0, 1.0);
    const int dim = grid.config().output_dim();
    std::vector<double> fd(static_cast<size_t>(dim)), fp(static_cast<size_t>(dim));
    grid.encode_direction({0, 0, 1}, fd);
    grid.encode({0.5, 0.5, 1.0}, fp);
    CHECK(fd == fp);

    // antipodal directions hit different cells
    std::vector<double> fa(static_cast<size_t>(dim)), fb(static_cast<size_t>(dim));
    grid.encode_direction(normalized({0.3, 0.5, 0.8}), fa);
    grid.encode_direction(normalized({-0.3, -0.5, -0.8}), fb);
    bool differ = false;
    for (int i = 0; i < dim; ++i) differ |= fa[size_t(i)] != fb[size_t(i)];
    CHECK(differ);
    CHECK_THROWS(grid.encode_direction({0, 0, 0}, fa));
}

TEST_CASE("directional encoding is numerically continuous") {
    Rng rng(37);
    HashGrid grid(small_config());
    grid.init_uniform(rng, -1.0, 1.0);
    const int dim = grid.config().output_dim();
    std::vector<double> fa(static_cast<size_t>(dim)), fb(static_cast<size_t>(dim));
    const Vec3 d = rng.unit_vector();
    double prev_gap = 1e9;
    for (double eps : {1e-3, 1e-5, 1e-7}) {
        const Vec3 d2 = normalized({d.x + eps, d.y, d.z});
        grid.encode_direction(d, fa);
        grid.encode_direction(d2, fb);
        double gap = 0.0;
        for (int i = 0; i < dim; ++i) gap = std::max(gap, std::fabs(fa[size_t(i)] - fb[size_t(i)]));
        CHECK(gap <= prev_gap + 1e-12);
        prev_gap = gap;
    }
    CHECK(prev_gap < 1e-5);
}

TEST_CASE("out-of-bounds points clamp instead of failing") {
    Rng rng(38);
    HashGrid grid(small_config());
    grid.init_uniform(rng);
    const int dim = grid.config().output_dim();
    std::vector<double> fa(static_cast<size_t>(dim)), fb(static_cast<size_t>(dim));
    grid.encode({5.0, 0.0, 0.0}, fa);
    grid.encode({1.0, 0.0, 0.0}, fb);  // clamped to the same face point
    CHECK(fa == fb);
}
