#pragma once

#include <array>
#include <string>
#include <vector>

#include "qgs/camera.hpp"
#include "qgs/image.hpp"
#include "qgs/rng.hpp"
#include "qgs/scene.hpp"

namespace qgs {

// Ground-truth directional color responses for the synthetic fitting tasks.
// sh_smooth lies inside the degree-3 SH model class; step_lobe is a hard
// spherical-cap indicator no degree-3 expansion can match; specular_spot is
// a narrow exponential lobe exp(kappa * (d.axis - 1)).
enum class TargetKind { ShSmooth, StepLobe, SpecularSpot };

TargetKind target_kind_from_name(const std::string& s);
std::string target_kind_name(TargetKind k);

struct DirectionalTarget {
    TargetKind kind = TargetKind::StepLobe;
    Vec3 axis{0, 0, 1};
    double cos_cap = 0.0;   // step_lobe cap boundary
    double kappa = 100.0;   // specular_spot sharpness
    Vec3 inside{1, 1, 1};   // cap / spot color
    Vec3 outside{0, 0, 0};  // base color
    std::array<double, 48> sh{};  // sh_smooth coefficients

    Vec3 eval(Vec3 d) const;
};

DirectionalTarget make_step_lobe(Vec3 axis, double half_angle_rad, Vec3 inside = {1, 1, 1},
                                 Vec3 outside = {0, 0, 0});
DirectionalTarget make_specular_spot(Vec3 axis, double kappa = 100.0, Vec3 inside = {1, 1, 1},
                                     Vec3 outside = {0, 0, 0});
DirectionalTarget random_target(TargetKind kind, Rng& rng);

struct Dataset {
    Scene scene;  // geometry with DC-only SH initialization
    std::vector<Camera> cameras;
    std::vector<Image> targets;  // 8-bit quantized at generation time
    std::vector<DirectionalTarget> responses;  // per gaussian, generator metadata
    TargetKind kind = TargetKind::StepLobe;
    uint64_t seed = 0;
    int num_gaussians = 0, views = 0, size = 0;
};

// Deterministic synthetic scene: gaussians in the centered unit box, a camera
// ring at 30 degrees elevation and radius 4x the scene extent, targets
// rendered with the analytic directional colors (bypassing SH).
Dataset generate_scene(int num_gaussians, TargetKind kind, uint64_t seed, int views = 16,
                       int size = 64);

void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

void save_cameras(const std::vector<Camera>& cams, const std::string& path);
std::vector<Camera> load_cameras(const std::string& path);

// Target image for one camera: the shared rasterizer with per-gaussian
// analytic colors, quantized to 8 bits.
Image render_target_view(const Scene& scene, const std::vector<DirectionalTarget>& responses,
                         const Camera& cam);

}  // namespace qgs
