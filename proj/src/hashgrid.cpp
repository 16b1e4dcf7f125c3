#include "qgs/hashgrid.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace qgs {

namespace {

// standard spatial-hash primes; dimension 0 multiplier is 1
constexpr uint32_t kPrimeY = 2654435761u;
constexpr uint32_t kPrimeZ = 805459861u;

bool is_pow2(uint32_t v) { return v != 0 && (v & (v - 1)) == 0; }

}  // namespace

std::vector<int> grid_levels(const HashGridConfig& cfg) {
    if (cfg.num_levels < 1) throw std::invalid_argument("grid_levels: num_levels < 1");
    if (cfg.base_resolution > cfg.max_resolution)
        throw std::invalid_argument("grid_levels: base_resolution > max_resolution");
    std::vector<int> res(size_t(cfg.num_levels));
    if (cfg.num_levels == 1) {
        res[0] = cfg.base_resolution;
        return res;
    }
    const double b = std::exp(std::log(double(cfg.max_resolution) / cfg.base_resolution) /
                              double(cfg.num_levels - 1));
    for (int l = 0; l < cfg.num_levels; ++l) {
        res[size_t(l)] = int(std::floor(cfg.base_resolution * std::pow(b, double(l))));
        if (l > 0 && res[size_t(l)] < res[size_t(l) - 1]) res[size_t(l)] = res[size_t(l) - 1];
    }
    // floor() can land one short of the exact endpoint
    res.back() = cfg.max_resolution;
    return res;
}

HashGrid::HashGrid(const HashGridConfig& cfg) : cfg_(cfg) {
    if (!is_pow2(cfg.table_size)) throw std::invalid_argument("HashGrid: table_size not a power of two");
    if (cfg.features_per_level < 1) throw std::invalid_argument("HashGrid: features_per_level < 1");
    resolutions_ = grid_levels(cfg);
    size_t off = 0;
    for (int l = 0; l < cfg.num_levels; ++l) {
        const uint64_t corners = uint64_t(resolutions_[size_t(l)] + 1);
        const uint64_t dense = corners * corners * corners;
        const bool hashed = dense > cfg.table_size;
        hashed_.push_back(hashed);
        entries_.push_back(hashed ? cfg.table_size : uint32_t(dense));
        offsets_.push_back(off);
        off += size_t(entries_.back()) * size_t(cfg.features_per_level);
    }
    table_.assign(off, 0.0);
}

void HashGrid::init_uniform(Rng& rng, double lo, double hi) {
    for (double& v : table_) v = rng.uniform(lo, hi);
}

uint32_t HashGrid::corner_index(int level, int ix, int iy, int iz) const {
    if (!hashed_[size_t(level)]) {
        const uint32_t n = uint32_t(resolutions_[size_t(level)] + 1);
        return (uint32_t(iz) * n + uint32_t(iy)) * n + uint32_t(ix);
    }
    const uint32_t h = uint32_t(ix) ^ (uint32_t(iy) * kPrimeY) ^ (uint32_t(iz) * kPrimeZ);
    return h & (cfg_.table_size - 1);
}

HashGrid::LocalFrame HashGrid::to_unit(Vec3 p) const {
    LocalFrame f{};
    f.clamped = false;
    for (int i = 0; i < 3; ++i) {
        const double lo = cfg_.bounds_lo[i], hi = cfg_.bounds_hi[i];
        double u = (p[i] - lo) / (hi - lo);
        if (u < 0.0) { u = 0.0; f.clamped = true; }
        if (u > 1.0) { u = 1.0; f.clamped = true; }
        f.unit[i] = u;
    }
    return f;
}

void HashGrid::encode(Vec3 p, std::span<double> out) const {
    const LocalFrame f = to_unit(p);
    if (f.clamped && !warned_clamp_) {
        std::fprintf(stderr, "[qgs] warning: hash grid query outside bounds, clamped\n");
        warned_clamp_ = true;
    }
    const int F = cfg_.features_per_level;
    for (int l = 0; l < cfg_.num_levels; ++l) {
        const int n = resolutions_[size_t(l)];
        double cell[3], frac[3];
        int c0[3];
        for (int i = 0; i < 3; ++i) {
            cell[i] = f.unit[i] * n;
            c0[i] = int(std::floor(cell[i]));
            if (c0[i] >= n) c0[i] = n - 1;  // p exactly on the upper face
            frac[i] = cell[i] - c0[i];
        }
        const double* tab = table_.data() + offsets_[size_t(l)];
        for (int fi = 0; fi < F; ++fi) out[size_t(l) * F + fi] = 0.0;
        for (int corner = 0; corner < 8; ++corner) {
            const int ox = corner & 1, oy = (corner >> 1) & 1, oz = (corner >> 2) & 1;
            const double w = (ox ? frac[0] : 1.0 - frac[0]) * (oy ? frac[1] : 1.0 - frac[1]) *
                             (oz ? frac[2] : 1.0 - frac[2]);
            const uint32_t idx = corner_index(l, c0[0] + ox, c0[1] + oy, c0[2] + oz);
            for (int fi = 0; fi < F; ++fi)
                out[size_t(l) * F + fi] += w * tab[size_t(idx) * F + fi];
        }
    }
}

Vec3 HashGrid::encode_backward(Vec3 p, std::span<const double> upstream,
                               std::span<double> table_grad) const {
    const LocalFrame f = to_unit(p);
    const int F = cfg_.features_per_level;
    Vec3 dp{};
    for (int l = 0; l < cfg_.num_levels; ++l) {
        const int n = resolutions_[size_t(l)];
        double cell[3], frac[3];
        int c0[3];
        bool at_clamp[3];
        for (int i = 0; i < 3; ++i) {
            cell[i] = f.unit[i] * n;
            c0[i] = int(std::floor(cell[i]));
            if (c0[i] >= n) c0[i] = n - 1;
            frac[i] = cell[i] - c0[i];
            // zero positional gradient where the query was clamped to the box
            const double raw = (p[i] - cfg_.bounds_lo[i]) / (cfg_.bounds_hi[i] - cfg_.bounds_lo[i]);
            at_clamp[i] = raw < 0.0 || raw > 1.0;
        }
        const double* tab = table_.data() + offsets_[size_t(l)];
        double* gtab = table_grad.data() + offsets_[size_t(l)];
        for (int corner = 0; corner < 8; ++corner) {
            const int ox = corner & 1, oy = (corner >> 1) & 1, oz = (corner >> 2) & 1;
            const double wx = ox ? frac[0] : 1.0 - frac[0];
            const double wy = oy ? frac[1] : 1.0 - frac[1];
            const double wz = oz ? frac[2] : 1.0 - frac[2];
            const double w = wx * wy * wz;
            const uint32_t idx = corner_index(l, c0[0] + ox, c0[1] + oy, c0[2] + oz);
            double dot = 0.0;
            for (int fi = 0; fi < F; ++fi) {
                const double u = upstream[size_t(l) * F + fi];
                gtab[size_t(idx) * F + fi] += w * u;
                dot += u * tab[size_t(idx) * F + fi];
            }
            const double sx = ox ? 1.0 : -1.0;
            const double sy = oy ? 1.0 : -1.0;
            const double sz = oz ? 1.0 : -1.0;
            if (!at_clamp[0]) dp.x += dot * sx * wy * wz * n / (cfg_.bounds_hi.x - cfg_.bounds_lo.x);
            if (!at_clamp[1]) dp.y += dot * wx * sy * wz * n / (cfg_.bounds_hi.y - cfg_.bounds_lo.y);
            if (!at_clamp[2]) dp.z += dot * wx * wy * sz * n / (cfg_.bounds_hi.z - cfg_.bounds_lo.z);
        }
    }
    return dp;
}

void HashGrid::encode_direction(Vec3 d, std::span<double> out) const {
    if (length(d) == 0.0) throw std::invalid_argument("encode_direction: zero direction");
    Vec3 p;
    for (int i = 0; i < 3; ++i)
        p[i] = cfg_.bounds_lo[i] + 0.5 * (d[i] + 1.0) * (cfg_.bounds_hi[i] - cfg_.bounds_lo[i]);
    encode(p, out);
}

Vec3 HashGrid::encode_direction_backward(Vec3 d, std::span<const double> upstream,
                                         std::span<double> table_grad) const {
    Vec3 p;
    for (int i = 0; i < 3; ++i)
        p[i] = cfg_.bounds_lo[i] + 0.5 * (d[i] + 1.0) * (cfg_.bounds_hi[i] - cfg_.bounds_lo[i]);
    const Vec3 dp = encode_backward(p, upstream, table_grad);
    Vec3 dd;
    for (int i = 0; i < 3; ++i) dd[i] = dp[i] * 0.5 * (cfg_.bounds_hi[i] - cfg_.bounds_lo[i]);
    return dd;
}

}  // namespace qgs
