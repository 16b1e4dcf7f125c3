#include "qgs/quantum.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace qgs {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void check_qubit(int q) {
    if (q < 0 || q >= kNumQubits) throw std::out_of_range("qubit index out of range");
}

// Visit the four (bit=0, bit=1) amplitude pairs of a qubit.
template <typename F>
void for_each_pair(int qubit, F&& f) {
    const int mask = 1 << qubit;
    for (int k = 0; k < kStateDim; ++k) {
        if (k & mask) continue;
        f(k, k | mask);
    }
}

}  // namespace

double StateVector::norm_sq() const {
    double n = 0.0;
    for (const Complex& a : amps) n += std::norm(a);
    return n;
}

BlochAngles bloch_angles(Vec3 d) {
    const double len = length(d);
    if (len == 0.0) throw std::invalid_argument("bloch_angles: zero direction");
    if (std::fabs(len - 1.0) > 1e-6) {
        std::fprintf(stderr, "[qgs] warning: normalizing non-unit direction (|d| = %.9g)\n", len);
    }
    d = d / len;
    const double dz = d.z < -1.0 ? -1.0 : (d.z > 1.0 ? 1.0 : d.z);
    BlochAngles a;
    a.theta = std::acos(dz);
    a.phi = std::atan2(d.y, d.x);  // atan2(0,0) = 0 at the poles
    if (a.phi < 0.0) a.phi += kTwoPi;
    if (a.phi >= kTwoPi) a.phi = 0.0;
    return a;
}

StateVector encode_direction(const BlochAngles& a) {
    StateVector s = StateVector::zero_state();
    for (int q = 0; q < kNumQubits; ++q) {
        apply_ry(s, q, a.theta);
        apply_rz(s, q, a.phi);
    }
    return s;
}

void apply_ry(StateVector& s, int qubit, double angle) {
    check_qubit(qubit);
    const double c = std::cos(0.5 * angle);
    const double sn = std::sin(0.5 * angle);
    for_each_pair(qubit, [&](int k0, int k1) {
        const Complex a0 = s.amps[k0];
        const Complex a1 = s.amps[k1];
        s.amps[k0] = c * a0 - sn * a1;
        s.amps[k1] = sn * a0 + c * a1;
    });
}

void apply_rz(StateVector& s, int qubit, double angle) {
    check_qubit(qubit);
    const Complex e0{std::cos(0.5 * angle), -std::sin(0.5 * angle)};
    const Complex e1 = std::conj(e0);
    for_each_pair(qubit, [&](int k0, int k1) {
        s.amps[k0] *= e0;
        s.amps[k1] *= e1;
    });
}

void apply_cnot(StateVector& s, int control, int target) {
    check_qubit(control);
    check_qubit(target);
    if (control == target) throw std::invalid_argument("apply_cnot: control equals target");
    const int cmask = 1 << control;
    const int tmask = 1 << target;
    for (int k = 0; k < kStateDim; ++k) {
        if ((k & cmask) && !(k & tmask)) std::swap(s.amps[k], s.amps[k | tmask]);
    }
}

void apply_ansatz(StateVector& s, const AnsatzParams& params) {
    for (int l = 0; l < params.num_layers; ++l) {
        for (int q = 0; q < kNumQubits; ++q) {
            apply_ry(s, q, params.theta(l, q));
            apply_rz(s, q, params.phi(l, q));
        }
        apply_cnot(s, 0, 1);
        apply_cnot(s, 1, 2);
        apply_cnot(s, 2, 0);
    }
}

void apply_conditioning(StateVector& s, const Conditioning& c) {
    for (int q = 0; q < kNumQubits; ++q) {
        apply_ry(s, q, c.spatial[q]);
        apply_rz(s, q, c.directional[q]);
    }
}

ExpectationVector measure_z(const StateVector& s) {
    ExpectationVector z{};
    for (int k = 0; k < kStateDim; ++k) {
        const double p = std::norm(s.amps[k]);
        for (int q = 0; q < kNumQubits; ++q) z[q] += (k & (1 << q)) ? -p : p;
    }
    return z;
}

ExpectationVector circuit_forward(const BlochAngles& enc,
                                  const std::optional<Conditioning>& cond,
                                  const AnsatzParams& params) {
    StateVector s = encode_direction(enc);
    if (cond) apply_conditioning(s, *cond);
    apply_ansatz(s, params);
    return measure_z(s);
}

namespace {

enum class GateKind { Ry, Rz, Cnot };

struct Gate {
    GateKind kind;
    int qubit;    // target (or control for Cnot)
    int target;   // Cnot target
    double angle;
    int param;    // slot in the gradient record, -1 if none
};

// Gradient slots: 0 = theta_enc, 1 = phi_enc, 2..4 = cond spatial,
// 5..7 = cond directional, 8.. = ansatz angles in storage order.
std::vector<Gate> build_circuit(const BlochAngles& enc,
                                const std::optional<Conditioning>& cond,
                                const AnsatzParams& params) {
    std::vector<Gate> gates;
    gates.reserve(6 + (cond ? 6 : 0) + params.num_layers * 9);
    for (int q = 0; q < kNumQubits; ++q) {
        gates.push_back({GateKind::Ry, q, -1, enc.theta, 0});
        gates.push_back({GateKind::Rz, q, -1, enc.phi, 1});
    }
    if (cond) {
        for (int q = 0; q < kNumQubits; ++q) {
            gates.push_back({GateKind::Ry, q, -1, cond->spatial[q], 2 + q});
            gates.push_back({GateKind::Rz, q, -1, cond->directional[q], 5 + q});
        }
    }
    for (int l = 0; l < params.num_layers; ++l) {
        for (int q = 0; q < kNumQubits; ++q) {
            const int base = 8 + int((size_t(l) * 3 + q) * 2);
            gates.push_back({GateKind::Ry, q, -1, params.theta(l, q), base});
            gates.push_back({GateKind::Rz, q, -1, params.phi(l, q), base + 1});
        }
        gates.push_back({GateKind::Cnot, 0, 1, 0.0, -1});
        gates.push_back({GateKind::Cnot, 1, 2, 0.0, -1});
        gates.push_back({GateKind::Cnot, 2, 0, 0.0, -1});
    }
    return gates;
}

void apply_gate(StateVector& s, const Gate& g, double sign) {
    switch (g.kind) {
        case GateKind::Ry: apply_ry(s, g.qubit, sign * g.angle); break;
        case GateKind::Rz: apply_rz(s, g.qubit, sign * g.angle); break;
        case GateKind::Cnot: apply_cnot(s, g.qubit, g.target); break;
    }
}

// (dU/da) psi for the rotation gates; dU/da = -i/2 * P * U with P the Pauli.
StateVector apply_gate_derivative(const StateVector& s, const Gate& g) {
    StateVector out = s;
    if (g.kind == GateKind::Ry) {
        const double c = 0.5 * std::cos(0.5 * g.angle);
        const double sn = 0.5 * std::sin(0.5 * g.angle);
        for_each_pair(g.qubit, [&](int k0, int k1) {
            const Complex a0 = s.amps[k0];
            const Complex a1 = s.amps[k1];
            out.amps[k0] = -sn * a0 - c * a1;
            out.amps[k1] = c * a0 - sn * a1;
        });
    } else {
        const Complex e0{std::cos(0.5 * g.angle), -std::sin(0.5 * g.angle)};
        const Complex f0 = Complex{0.0, -0.5} * e0;
        const Complex f1 = Complex{0.0, 0.5} * std::conj(e0);
        for_each_pair(g.qubit, [&](int k0, int k1) {
            out.amps[k0] = f0 * s.amps[k0];
            out.amps[k1] = f1 * s.amps[k1];
        });
    }
    return out;
}

double re_inner(const StateVector& a, const StateVector& b) {
    double r = 0.0;
    for (int k = 0; k < kStateDim; ++k)
        r += a.amps[k].real() * b.amps[k].real() + a.amps[k].imag() * b.amps[k].imag();
    return r;
}

}  // namespace

CircuitGradients circuit_gradients(const BlochAngles& enc,
                                   const std::optional<Conditioning>& cond,
                                   const AnsatzParams& params,
                                   const std::array<double, 3>& upstream) {
    const std::vector<Gate> gates = build_circuit(enc, cond, params);

    StateVector psi = StateVector::zero_state();
    for (const Gate& g : gates) apply_gate(psi, g, 1.0);

    // b = sum_j upstream[j] * Z_j |psi>; dL/da = 2 Re <b| dU/da |psi_prev>
    StateVector b;
    for (int k = 0; k < kStateDim; ++k) {
        double w = 0.0;
        for (int q = 0; q < kNumQubits; ++q) w += (k & (1 << q)) ? -upstream[q] : upstream[q];
        b.amps[k] = w * psi.amps[k];
    }

    std::vector<double> slots(8 + params.angles.size(), 0.0);
    for (auto it = gates.rbegin(); it != gates.rend(); ++it) {
        apply_gate(psi, *it, -1.0);  // psi now holds the state before this gate
        if (it->param >= 0) {
            const StateVector dpsi = apply_gate_derivative(psi, *it);
            slots[size_t(it->param)] += 2.0 * re_inner(b, dpsi);
        }
        apply_gate(b, *it, -1.0);
    }

    CircuitGradients g;
    g.d_theta_enc = slots[0];
    g.d_phi_enc = slots[1];
    for (int q = 0; q < 3; ++q) {
        g.d_cond_spatial[q] = slots[2 + q];
        g.d_cond_directional[q] = slots[5 + q];
    }
    g.d_angles.assign(slots.begin() + 8, slots.end());
    return g;
}

DirectionGradient bloch_angles_backward(Vec3 d, double d_theta, double d_phi) {
    const double rxy2 = d.x * d.x + d.y * d.y;
    const double s = std::sqrt(std::max(rxy2, 1e-300));
    DirectionGradient g;
    // theta = arccos(d_z)
    g.d_dir.z = -d_theta / s;
    // phi = atan2(d_y, d_x)
    g.d_dir.x = -d_phi * d.y / rxy2;
    g.d_dir.y = d_phi * d.x / rxy2;
    return g;
}

}  // namespace qgs
