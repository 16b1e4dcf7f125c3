#pragma once

#include <optional>
#include <span>
#include <vector>

#include "qgs/camera.hpp"
#include "qgs/image.hpp"
#include "qgs/scene.hpp"

namespace qgs {

// CPU rasterizer: perspective projection of 3D Gaussians, depth-sorted
// front-to-back alpha compositing, with a hand-derived backward pass for every
// Gaussian attribute and for the view-dependent modulation factors.
//
// Determinism: Gaussians are sorted by depth with index tie-break; gradient
// accumulation uses one buffer per pixel row merged in row order, so results
// are bit-identical for any thread count.

struct RenderOptions {
    std::optional<ModulationMode> mode;  // nullopt renders plain SH
    Vec3 background{0.0, 0.0, 0.0};
    int threads = 1;
    // forward-only: replaces each gaussian's composited color (used by the
    // synthetic dataset generator to rasterize analytic directional colors)
    const std::vector<Vec3>* color_override = nullptr;
};

// Per-Gaussian multiplicative factors as produced by decode(); layout is the
// mode's n_out. Ignored (may be empty) when options.mode is nullopt.
using ModulationFactors = std::vector<std::vector<double>>;

struct RenderResult {
    Image rgb;
    std::vector<double> transmittance;  // width*height, remaining T per pixel
};

RenderResult render(const Scene& scene, const Camera& cam, const RenderOptions& opt,
                    const ModulationFactors* factors = nullptr);

struct GaussianGrads {
    Vec3 d_mu{};
    std::array<double, 4> d_rot{};  // w,x,y,z
    Vec3 d_log_scale{};
    double d_opacity_logit = 0.0;
    std::array<double, 48> d_sh{};
    std::vector<double> d_factors;  // n_out entries when modulated
};

// dL/dx for every input given dL/dimage. Recomputes the forward internally.
std::vector<GaussianGrads> render_backward(const Scene& scene, const Camera& cam,
                                           const RenderOptions& opt,
                                           const ModulationFactors* factors,
                                           const Image& d_image);

// Projection of one Gaussian: pixel-space mean, 2x2 covariance (with the
// 0.3 px isotropic floor), view depth. Returns nullopt behind the near plane.
struct Projected {
    Vec2 mean;
    double cov_xx, cov_xy, cov_yy;
    double depth;
};
std::optional<Projected> project_gaussian(const Gaussian& g, const Camera& cam);

}  // namespace qgs
