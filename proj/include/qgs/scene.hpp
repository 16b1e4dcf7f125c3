#pragma once

#include <array>
#include <string>
#include <vector>

#include "qgs/vec.hpp"

namespace qgs {

// One splat. Scale is stored as log-scales and opacity as a logit so the
// optimizer works on unconstrained reals; covariance is R S S^T R^T with
// S = diag(exp(log_scale)).
struct Gaussian {
    Vec3 mu{};
    Quat rot{};
    Vec3 log_scale{};
    double opacity_logit = 0.0;
    std::array<double, 48> sh{};  // channel-major, 16 coefficients per channel
};

struct Scene {
    std::vector<Gaussian> gaussians;
    Vec3 bounds_lo{-1.0, -1.0, -1.0};
    Vec3 bounds_hi{1.0, 1.0, 1.0};
};

// Which appearance attributes the quantum network modulates, and the decode
// width n_out that goes with it.
enum class ModulationMode { Full, OnlyOpacity, OnlySh, NoSh };

int modulation_n_out(ModulationMode m);
int modulation_sh_degree(ModulationMode m);  // NoSh renders degree 0
std::string modulation_name(ModulationMode m);
ModulationMode modulation_from_name(const std::string& s);

// Binary scene format (.qgs): bit-exact round trip, little-endian f64 payload.
void save_scene(const Scene& scene, const std::string& path);
Scene load_scene(const std::string& path);

}  // namespace qgs
