#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qgs/rng.hpp"
#include "qgs/vec.hpp"

namespace qgs {

struct HashGridConfig {
    int num_levels = 8;
    int features_per_level = 2;
    uint32_t table_size = 1u << 14;  // power of two
    int base_resolution = 16;
    int max_resolution = 512;
    Vec3 bounds_lo{-1.0, -1.0, -1.0};
    Vec3 bounds_hi{1.0, 1.0, 1.0};

    int output_dim() const { return num_levels * features_per_level; }
};

// Per-level grid resolutions: N_l = floor(base * b^l) with
// b = exp(ln(max/base) / (num_levels - 1)); non-decreasing.
std::vector<int> grid_levels(const HashGridConfig& cfg);

// Trainable multi-resolution feature table over an axis-aligned box.
// Levels whose dense corner grid fits in table_size index directly; finer
// levels use the spatial hash with per-dimension prime multipliers.
class HashGrid {
public:
    explicit HashGrid(const HashGridConfig& cfg);

    const HashGridConfig& config() const { return cfg_; }
    const std::vector<int>& resolutions() const { return resolutions_; }

    // Flat trainable storage: level tables concatenated, each
    // entries(level) * features_per_level doubles.
    std::vector<double>& table() { return table_; }
    const std::vector<double>& table() const { return table_; }
    size_t level_offset(int level) const { return offsets_[size_t(level)]; }
    uint32_t level_entries(int level) const { return entries_[size_t(level)]; }
    bool level_hashed(int level) const { return hashed_[size_t(level)]; }

    void init_uniform(Rng& rng, double lo = -1e-4, double hi = 1e-4);

    // Trilinear feature lookup; out must hold output_dim() doubles.
    // Points outside the bounds are clamped (warning once per grid).
    void encode(Vec3 p, std::span<double> out) const;

    // Accumulates dL/dtable into table_grad (same layout as table()) and
    // returns dL/dp. upstream has output_dim() entries.
    Vec3 encode_backward(Vec3 p, std::span<const double> upstream,
                         std::span<double> table_grad) const;

    // Unit direction remapped from [-1,1]^3 into the grid bounds, then encoded.
    void encode_direction(Vec3 d, std::span<double> out) const;
    Vec3 encode_direction_backward(Vec3 d, std::span<const double> upstream,
                                   std::span<double> table_grad) const;

    uint32_t corner_index(int level, int ix, int iy, int iz) const;

private:
    struct LocalFrame {
        Vec3 unit;      // position in [0,1]^3
        bool clamped;
    };
    LocalFrame to_unit(Vec3 p) const;

    HashGridConfig cfg_;
    std::vector<int> resolutions_;
    std::vector<size_t> offsets_;
    std::vector<uint32_t> entries_;
    std::vector<bool> hashed_;
    std::vector<double> table_;
    mutable bool warned_clamp_ = false;
};

}  // namespace qgs
