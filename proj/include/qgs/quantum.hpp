#pragma once

#include <array>
#include <complex>
#include <optional>
#include <vector>

#include "qgs/vec.hpp"

namespace qgs {

// Exact statevector simulation of the 3-qubit register that modulates Gaussian
// appearance. Qubit j is bit j of the basis-state index (little-endian), so
// amps[0b101] is the amplitude of |q2=1, q1=0, q0=1>.

inline constexpr int kNumQubits = 3;
inline constexpr int kStateDim = 1 << kNumQubits;

using Complex = std::complex<double>;

struct StateVector {
    std::array<Complex, kStateDim> amps{};

    static StateVector zero_state() {
        StateVector s;
        s.amps[0] = Complex{1.0, 0.0};
        return s;
    }

    double norm_sq() const;
};

// Bloch angles of a viewing direction: theta in [0, pi], phi in [0, 2*pi).
struct BlochAngles {
    double theta = 0.0;
    double phi = 0.0;
};

// Trainable rotation angles of the layered ansatz, stored flat as
// [layer][qubit][theta, phi], i.e. index ((layer*3)+qubit)*2 + (0:theta, 1:phi).
struct AnsatzParams {
    int num_layers = 4;
    std::vector<double> angles;  // 2 * 3 * num_layers entries

    static AnsatzParams zeros(int layers) {
        return AnsatzParams{layers, std::vector<double>(size_t(6) * layers, 0.0)};
    }

    double theta(int layer, int qubit) const { return angles[(size_t(layer) * 3 + qubit) * 2]; }
    double phi(int layer, int qubit) const { return angles[(size_t(layer) * 3 + qubit) * 2 + 1]; }
};

// Per-qubit data-uploading rotations applied between the direction encoding
// and the ansatz (global-conditioning pipeline): Ry(spatial[j]) then
// Rz(directional[j]) on qubit j.
struct Conditioning {
    std::array<double, 3> spatial{};
    std::array<double, 3> directional{};
};

// Z expectation per qubit, each in [-1, 1].
using ExpectationVector = std::array<double, 3>;

// theta = arccos(d_z), phi = atan2(d_y, d_x) wrapped into [0, 2*pi).
// Non-unit input is normalized (warning to stderr beyond 1e-6 deviation);
// the zero vector throws.
BlochAngles bloch_angles(Vec3 d);

// Rz(phi) * Ry(theta) on each qubit starting from |000>.
StateVector encode_direction(const BlochAngles& a);

void apply_ry(StateVector& s, int qubit, double angle);
void apply_rz(StateVector& s, int qubit, double angle);
void apply_cnot(StateVector& s, int control, int target);

// Per layer: Ry/Rz pair on each qubit, then the CNOT ring 0->1, 1->2, 2->0.
void apply_ansatz(StateVector& s, const AnsatzParams& params);

void apply_conditioning(StateVector& s, const Conditioning& c);

ExpectationVector measure_z(const StateVector& s);

// Full forward pass of the modulation circuit.
ExpectationVector circuit_forward(const BlochAngles& enc,
                                  const std::optional<Conditioning>& cond,
                                  const AnsatzParams& params);

struct CircuitGradients {
    double d_theta_enc = 0.0;
    double d_phi_enc = 0.0;
    std::array<double, 3> d_cond_spatial{};
    std::array<double, 3> d_cond_directional{};
    std::vector<double> d_angles;  // same layout as AnsatzParams::angles
};

// Analytic gradients of upstream . <Z> with respect to every rotation angle,
// via adjoint backpropagation through the statevector (exact, one backward
// sweep of inverse gates). upstream[j] = dLoss/d<Z_j>.
CircuitGradients circuit_gradients(const BlochAngles& enc,
                                   const std::optional<Conditioning>& cond,
                                   const AnsatzParams& params,
                                   const std::array<double, 3>& upstream);

// Chain rule from Bloch angles back to the unit direction they encode.
// Undefined at the poles (|d_z| = 1), where phi is degenerate.
struct DirectionGradient {
    Vec3 d_dir;
};
DirectionGradient bloch_angles_backward(Vec3 d, double d_theta, double d_phi);

}  // namespace qgs
