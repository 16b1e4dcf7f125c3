#pragma once

#include <array>
#include <span>

#include "qgs/vec.hpp"

namespace qgs {

// Real spherical harmonics, degrees 0..3, Condon-Shortley phase, the basis
// used by Gaussian-splatting renderers. Coefficients are stored channel-major:
// sh[ch * 16 + k] for ch in {R,G,B}, k in basis order (l,m) =
// (0,0),(1,-1),(1,0),(1,1),(2,-2)..(2,2),(3,-3)..(3,3).

inline constexpr int kShCoeffsPerChannel = 16;
inline constexpr int kShCoeffs = 3 * kShCoeffsPerChannel;

// Basis values at a unit direction; entries above (degree+1)^2 are zero.
std::array<double, kShCoeffsPerChannel> sh_basis(Vec3 d, int degree = 3);

// d-derivatives of every basis value (treating x,y,z as free coordinates).
struct ShBasisGrad {
    std::array<double, kShCoeffsPerChannel> dx{}, dy{}, dz{};
};
ShBasisGrad sh_basis_grad(Vec3 d, int degree = 3);

// Per-channel color: clamp01(sum_k sh[ch*16+k] * basis_k + 0.5).
Vec3 eval_sh(std::span<const double> sh, Vec3 d, int degree = 3);

// Accumulates dL/dsh into d_sh (48 entries) and returns dL/dd. Channels that
// were clamped pass no gradient.
Vec3 eval_sh_backward(std::span<const double> sh, Vec3 d, Vec3 upstream,
                      std::span<double> d_sh, int degree = 3);

}  // namespace qgs
