#include "qgs/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qgs {

VarId Tape::push(Node n) {
    n.off = values_.size();
    values_.resize(values_.size() + size_t(n.size), 0.0);
    grads_.resize(values_.size(), 0.0);
    nodes_.push_back(n);
    return VarId(nodes_.size() - 1);
}

void Tape::check_same_size(VarId a, VarId b, const char* what) const {
    if (nodes_[size_t(a)].size != nodes_[size_t(b)].size)
        throw std::invalid_argument(std::string("tape: size mismatch in ") + what);
}

void Tape::fail(VarId node, const std::string& msg) const {
    throw std::runtime_error("tape node " + std::to_string(node) + ": " + msg);
}

int Tape::size(VarId v) const { return nodes_[size_t(v)].size; }

std::span<const double> Tape::value(VarId v) const {
    return {val_ptr(v), size_t(nodes_[size_t(v)].size)};
}

std::span<const double> Tape::grad(VarId v) const {
    return {grads_.data() + nodes_[size_t(v)].off, size_t(nodes_[size_t(v)].size)};
}

VarId Tape::leaf(std::span<const double> values) {
    Node n{};
    n.op = Op::Leaf;
    n.size = int(values.size());
    const VarId id = push(n);
    std::copy(values.begin(), values.end(), val_ptr(id));
    return id;
}

VarId Tape::param(std::span<const double> values, double* ext_grad) {
    Node n{};
    n.op = Op::Param;
    n.size = int(values.size());
    n.ext_grad = ext_grad;
    const VarId id = push(n);
    std::copy(values.begin(), values.end(), val_ptr(id));
    return id;
}

VarId Tape::add(VarId a, VarId b) {
    check_same_size(a, b, "add");
    Node n{};
    n.op = Op::Add;
    n.a = a;
    n.b = b;
    n.size = nodes_[size_t(a)].size;
    const VarId id = push(n);
    double* out = val_ptr(id);
    const double* va = val_ptr(a);
    const double* vb = val_ptr(b);
    for (int i = 0; i < n.size; ++i) out[i] = va[i] + vb[i];
    return id;
}

VarId Tape::sub(VarId a, VarId b) {
    check_same_size(a, b, "sub");
    Node n{};
    n.op = Op::Sub;
    n.a = a;
    n.b = b;
    n.size = nodes_[size_t(a)].size;
    const VarId id = push(n);
    double* out = val_ptr(id);
    const double* va = val_ptr(a);
    const double* vb = val_ptr(b);
    for (int i = 0; i < n.size; ++i) out[i] = va[i] - vb[i];
    return id;
}

VarId Tape::mul(VarId a, VarId b) {
    check_same_size(a, b, "mul");
    Node n{};
    n.op = Op::Mul;
    n.a = a;
    n.b = b;
    n.size = nodes_[size_t(a)].size;
    const VarId id = push(n);
    double* out = val_ptr(id);
    const double* va = val_ptr(a);
    const double* vb = val_ptr(b);
    for (int i = 0; i < n.size; ++i) out[i] = va[i] * vb[i];
    return id;
}

VarId Tape::div(VarId a, VarId b) {
    check_same_size(a, b, "div");
    Node n{};
    n.op = Op::Div;
    n.a = a;
    n.b = b;
    n.size = nodes_[size_t(a)].size;
    const VarId id = push(n);
    double* out = val_ptr(id);
    const double* va = val_ptr(a);
    const double* vb = val_ptr(b);
    for (int i = 0; i < n.size; ++i) {
        if (vb[i] == 0.0) fail(id, "division by zero");
        out[i] = va[i] / vb[i];
    }
    return id;
}

VarId Tape::vmax(VarId a, VarId b) {
    check_same_size(a, b, "max");
    Node n{};
    n.op = Op::Max;
    n.a = a;
    n.b = b;
    n.size = nodes_[size_t(a)].size;
    const VarId id = push(n);
    double* out = val_ptr(id);
    const double* va = val_ptr(a);
    const double* vb = val_ptr(b);
    for (int i = 0; i < n.size; ++i) out[i] = va[i] >= vb[i] ? va[i] : vb[i];
    return id;
}

VarId Tape::bmul(VarId a, VarId s) {
    if (nodes_[size_t(s)].size != 1) throw std::invalid_argument("tape: bmul scalar must have size 1");
    Node n{};
    n.op = Op::BMul;
    n.a = a;
    n.b = s;
    n.size = nodes_[size_t(a)].size;
    const VarId id = push(n);
    double* out = val_ptr(id);
    const double* va = val_ptr(a);
    const double sv = *val_ptr(s);
    for (int i = 0; i < n.size; ++i) out[i] = va[i] * sv;
    return id;
}

VarId Tape::add_const(VarId a, double c) {
    Node n{};
    n.op = Op::AddC;
    n.a = a;
    n.c = c;
    n.size = nodes_[size_t(a)].size;
    const VarId id = push(n);
    double* out = val_ptr(id);
    const double* va = val_ptr(a);
    for (int i = 0; i < n.size; ++i) out[i] = va[i] + c;
    return id;
}

VarId Tape::mul_const(VarId a, double c) {
    Node n{};
    n.op = Op::MulC;
    n.a = a;
    n.c = c;
    n.size = nodes_[size_t(a)].size;
    const VarId id = push(n);
    double* out = val_ptr(id);
    const double* va = val_ptr(a);
    for (int i = 0; i < n.size; ++i) out[i] = va[i] * c;
    return id;
}

VarId Tape::exp(VarId a) {
    Node n{};
    n.op = Op::Exp;
    n.a = a;
    n.size = nodes_[size_t(a)].size;
    const VarId id = push(n);
    double* out = val_ptr(id);
    const double* va = val_ptr(a);
    for (int i = 0; i < n.size; ++i) out[i] = std::exp(va[i]);
    return id;
}

VarId Tape::log(VarId a) {
    Node n{};
    n.op = Op::Log;
    n.a = a;
    n.size = nodes_[size_t(a)].size;
    const VarId id = push(n);
    double* out = val_ptr(id);
    const double* va = val_ptr(a);
    for (int i = 0; i < n.size; ++i) {
        if (!(va[i] > 0.0)) fail(id, "log of non-positive value");
        out[i] = std::log(va[i]);
    }
    return id;
}

VarId Tape::tanh(VarId a) {
    Node n{};
    n.op = Op::Tanh;
    n.a = a;
    n.size = nodes_[size_t(a)].size;
    const VarId id = push(n);
    double* out = val_ptr(id);
    const double* va = val_ptr(a);
    for (int i = 0; i < n.size; ++i) out[i] = std::tanh(va[i]);
    return id;
}

VarId Tape::erf(VarId a) {
    Node n{};
    n.op = Op::Erf;
    n.a = a;
    n.size = nodes_[size_t(a)].size;
    const VarId id = push(n);
    double* out = val_ptr(id);
    const double* va = val_ptr(a);
    for (int i = 0; i < n.size; ++i) out[i] = std::erf(va[i]);
    return id;
}

VarId Tape::sqrt(VarId a) {
    Node n{};
    n.op = Op::Sqrt;
    n.a = a;
    n.size = nodes_[size_t(a)].size;
    const VarId id = push(n);
    double* out = val_ptr(id);
    const double* va = val_ptr(a);
    for (int i = 0; i < n.size; ++i) {
        if (va[i] < 0.0) fail(id, "sqrt of negative value");
        out[i] = std::sqrt(va[i]);
    }
    return id;
}

VarId Tape::sum(VarId a) {
    Node n{};
    n.op = Op::Sum;
    n.a = a;
    n.size = 1;
    const VarId id = push(n);
    const double* va = val_ptr(a);
    double s = 0.0;
    for (int i = 0; i < nodes_[size_t(a)].size; ++i) s += va[i];
    *val_ptr(id) = s;
    return id;
}

VarId Tape::matvec(VarId w, VarId x, int m, int n_in) {
    if (nodes_[size_t(w)].size != m * n_in) throw std::invalid_argument("tape: matvec W size");
    if (nodes_[size_t(x)].size != n_in) throw std::invalid_argument("tape: matvec x size");
    Node n{};
    n.op = Op::MatVec;
    n.a = w;
    n.b = x;
    n.m = m;
    n.n = n_in;
    n.size = m;
    const VarId id = push(n);
    double* out = val_ptr(id);
    const double* vw = val_ptr(w);
    const double* vx = val_ptr(x);
    for (int i = 0; i < m; ++i) {
        double s = 0.0;
        for (int j = 0; j < n_in; ++j) s += vw[size_t(i) * n_in + j] * vx[j];
        out[i] = s;
    }
    return id;
}

VarId Tape::slice(VarId a, int offset, int len) {
    if (offset < 0 || offset + len > nodes_[size_t(a)].size)
        throw std::invalid_argument("tape: slice out of range");
    Node n{};
    n.op = Op::Slice;
    n.a = a;
    n.c = double(offset);
    n.size = len;
    const VarId id = push(n);
    double* out = val_ptr(id);
    const double* va = val_ptr(a);
    for (int i = 0; i < len; ++i) out[i] = va[offset + i];
    return id;
}

namespace {

AnsatzParams params_from(std::span<const double> v) {
    AnsatzParams p;
    p.num_layers = int(v.size() / 6);
    p.angles.assign(v.begin(), v.end());
    return p;
}

std::optional<Conditioning> cond_from(const double* s, const double* v) {
    if (s == nullptr) return std::nullopt;
    Conditioning c;
    for (int i = 0; i < 3; ++i) {
        c.spatial[size_t(i)] = s[i];
        c.directional[size_t(i)] = v[i];
    }
    return c;
}

}  // namespace

VarId Tape::quantum(VarId dir, VarId angles, VarId cond_spatial, VarId cond_directional) {
    if (nodes_[size_t(dir)].size != 3) throw std::invalid_argument("tape: quantum dir size");
    if (nodes_[size_t(angles)].size % 6 != 0) throw std::invalid_argument("tape: quantum angles size");
    if ((cond_spatial >= 0) != (cond_directional >= 0))
        throw std::invalid_argument("tape: quantum conditioning needs both inputs");
    Node n{};
    n.op = Op::Quantum;
    n.a = dir;
    n.b = angles;
    n.c1 = cond_spatial;
    n.c2 = cond_directional;
    n.size = 3;
    const VarId id = push(n);
    const double* vd = val_ptr(dir);
    const BlochAngles enc = bloch_angles(Vec3{vd[0], vd[1], vd[2]});
    const double* cs = cond_spatial >= 0 ? val_ptr(cond_spatial) : nullptr;
    const double* cv = cond_directional >= 0 ? val_ptr(cond_directional) : nullptr;
    const AnsatzParams ap = params_from(value(angles));
    const ExpectationVector z = circuit_forward(enc, cond_from(cs, cv), ap);
    double* out = val_ptr(id);
    for (int q = 0; q < 3; ++q) out[q] = z[size_t(q)];
    return id;
}

VarId Tape::hash_encode(const HashGrid* grid, VarId point, double* table_grad, bool directional) {
    if (nodes_[size_t(point)].size != 3) throw std::invalid_argument("tape: hash point size");
    Node n{};
    n.op = Op::Hash;
    n.a = point;
    n.grid = grid;
    n.ext_grad = table_grad;
    n.c = directional ? 1.0 : 0.0;
    n.size = grid->config().output_dim();
    const VarId id = push(n);
    const double* vp = val_ptr(point);
    const Vec3 p{vp[0], vp[1], vp[2]};
    const std::span<double> out{val_ptr(id), size_t(n.size)};
    if (directional) grid->encode_direction(p, out);
    else grid->encode(p, out);
    return id;
}

void Tape::seed(VarId v, std::span<const double> upstream) {
    if (int(upstream.size()) != nodes_[size_t(v)].size)
        throw std::invalid_argument("tape: seed size mismatch");
    double* g = grad_ptr(v);
    for (size_t i = 0; i < upstream.size(); ++i) g[i] += upstream[i];
}

void Tape::backward_scalar(VarId root) {
    if (nodes_[size_t(root)].size != 1) throw std::invalid_argument("tape: scalar root expected");
    seed(root, 1.0);
    backward();
}

void Tape::backward() {
    for (size_t idx = nodes_.size(); idx-- > 0;) {
        const Node& nd = nodes_[idx];
        const double* g = grads_.data() + nd.off;
        const double* v = values_.data() + nd.off;
        double* ga = nd.a >= 0 ? grad_ptr(nd.a) : nullptr;
        double* gb = nd.b >= 0 ? grad_ptr(nd.b) : nullptr;
        const double* va = nd.a >= 0 ? val_ptr(nd.a) : nullptr;
        const double* vb = nd.b >= 0 ? val_ptr(nd.b) : nullptr;
        const int sz = nd.size;
        switch (nd.op) {
            case Op::Leaf:
                break;
            case Op::Param:
                for (int i = 0; i < sz; ++i) nd.ext_grad[i] += g[i];
                break;
            case Op::Add:
                for (int i = 0; i < sz; ++i) { ga[i] += g[i]; gb[i] += g[i]; }
                break;
            case Op::Sub:
                for (int i = 0; i < sz; ++i) { ga[i] += g[i]; gb[i] -= g[i]; }
                break;
            case Op::Mul:
                for (int i = 0; i < sz; ++i) { ga[i] += g[i] * vb[i]; gb[i] += g[i] * va[i]; }
                break;
            case Op::Div:
                for (int i = 0; i < sz; ++i) {
                    ga[i] += g[i] / vb[i];
                    gb[i] -= g[i] * v[i] / vb[i];
                }
                break;
            case Op::Max:
                for (int i = 0; i < sz; ++i) {
                    if (va[i] >= vb[i]) ga[i] += g[i];
                    else gb[i] += g[i];
                }
                break;
            case Op::BMul: {
                double ds = 0.0;
                for (int i = 0; i < sz; ++i) {
                    ga[i] += g[i] * vb[0];
                    ds += g[i] * va[i];
                }
                gb[0] += ds;
                break;
            }
            case Op::AddC:
                for (int i = 0; i < sz; ++i) ga[i] += g[i];
                break;
            case Op::MulC:
                for (int i = 0; i < sz; ++i) ga[i] += g[i] * nd.c;
                break;
            case Op::Exp:
                for (int i = 0; i < sz; ++i) ga[i] += g[i] * v[i];
                break;
            case Op::Log:
                for (int i = 0; i < sz; ++i) ga[i] += g[i] / va[i];
                break;
            case Op::Tanh:
                for (int i = 0; i < sz; ++i) ga[i] += g[i] * (1.0 - v[i] * v[i]);
                break;
            case Op::Erf:
                // d/dx erf(x) = 2/sqrt(pi) * exp(-x^2)
                for (int i = 0; i < sz; ++i)
                    ga[i] += g[i] * 1.1283791670955125739 * std::exp(-va[i] * va[i]);
                break;
            case Op::Sqrt:
                for (int i = 0; i < sz; ++i) ga[i] += g[i] * 0.5 / v[i];
                break;
            case Op::Sum:
                for (int i = 0; i < nodes_[size_t(nd.a)].size; ++i) ga[i] += g[0];
                break;
            case Op::MatVec:
                for (int i = 0; i < nd.m; ++i) {
                    const double gi = g[i];
                    if (gi == 0.0) continue;
                    for (int j = 0; j < nd.n; ++j) {
                        ga[size_t(i) * nd.n + j] += gi * vb[j];
                        gb[j] += gi * va[size_t(i) * nd.n + j];
                    }
                }
                break;
            case Op::Slice: {
                const int off = int(nd.c);
                for (int i = 0; i < sz; ++i) ga[off + i] += g[i];
                break;
            }
            case Op::Quantum: {
                const std::array<double, 3> up{g[0], g[1], g[2]};
                const Vec3 d{va[0], va[1], va[2]};
                const BlochAngles enc = bloch_angles(d);
                const double* cs = nd.c1 >= 0 ? val_ptr(nd.c1) : nullptr;
                const double* cv = nd.c2 >= 0 ? val_ptr(nd.c2) : nullptr;
                const AnsatzParams ap = params_from({vb, size_t(nodes_[size_t(nd.b)].size)});
                const CircuitGradients cg = circuit_gradients(enc, cond_from(cs, cv), ap, up);
                for (size_t i = 0; i < cg.d_angles.size(); ++i) gb[i] += cg.d_angles[i];
                const DirectionGradient dg = bloch_angles_backward(d, cg.d_theta_enc, cg.d_phi_enc);
                ga[0] += dg.d_dir.x;
                ga[1] += dg.d_dir.y;
                ga[2] += dg.d_dir.z;
                if (nd.c1 >= 0) {
                    double* g1 = grad_ptr(nd.c1);
                    double* g2 = grad_ptr(nd.c2);
                    for (int q = 0; q < 3; ++q) {
                        g1[q] += cg.d_cond_spatial[size_t(q)];
                        g2[q] += cg.d_cond_directional[size_t(q)];
                    }
                }
                break;
            }
            case Op::Hash: {
                const Vec3 p{va[0], va[1], va[2]};
                const std::span<const double> up{g, size_t(sz)};
                const std::span<double> tg{nd.ext_grad, nd.grid->table().size()};
                const Vec3 dp = nd.c != 0.0 ? nd.grid->encode_direction_backward(p, up, tg)
                                            : nd.grid->encode_backward(p, up, tg);
                ga[0] += dp.x;
                ga[1] += dp.y;
                ga[2] += dp.z;
                break;
            }
        }
    }
}

VarId gelu(Tape& t, VarId x) {
    const VarId u = t.erf(t.mul_const(x, 0.70710678118654752440));
    return t.mul(x, t.add_const(t.mul_const(u, 0.5), 0.5));
}

VarId sigmoid2(Tape& t, VarId x) {
    const VarId e = t.exp(t.mul_const(x, -1.0));
    std::vector<double> ones(size_t(t.size(x)), 1.0);
    const VarId one = t.leaf(ones);
    return t.mul_const(t.div(one, t.add_const(e, 1.0)), 2.0);
}

}  // namespace qgs
