#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qgs/hashgrid.hpp"
#include "qgs/quantum.hpp"

namespace qgs {

using VarId = int32_t;

// Reverse-mode tape over real vectors. One tape is recorded per training step
// and discarded; creation order is the topological order, so backward() is a
// single reverse sweep with additive gradient accumulation.
//
// The quantum circuit and the hash grids enter as boundary nodes: their
// forwards call the dedicated modules and their backwards return analytic
// gradients (circuit adjoint, trilinear scatter), which keeps complex
// amplitudes and feature tables off the real-valued tape.
class Tape {
public:
    // constant input (gradient tracked but not exported)
    VarId leaf(std::span<const double> values);
    VarId leaf(double value) { return leaf(std::span<const double>(&value, 1)); }

    // trainable input: values are copied in, gradients are added into ext_grad
    // (same length) when backward() finishes
    VarId param(std::span<const double> values, double* ext_grad);

    // elementwise, equal sizes
    VarId add(VarId a, VarId b);
    VarId sub(VarId a, VarId b);
    VarId mul(VarId a, VarId b);
    VarId div(VarId a, VarId b);  // throws on zero divisor, names the node
    VarId vmax(VarId a, VarId b);

    // broadcast: every element of a times the single element of s
    VarId bmul(VarId a, VarId s);

    VarId add_const(VarId a, double c);
    VarId mul_const(VarId a, double c);

    VarId exp(VarId a);
    VarId log(VarId a);  // throws on non-positive input, names the node
    VarId tanh(VarId a);
    VarId erf(VarId a);
    VarId sqrt(VarId a);

    VarId sum(VarId a);                       // size-1 output
    VarId matvec(VarId w, VarId x, int m, int n);  // w row-major m*n, x size n
    VarId slice(VarId a, int offset, int len);

    // z expectations of the modulation circuit. dir is a unit 3-vector var,
    // angles holds 6*L ansatz angles; cond_* are optional per-qubit uploading
    // angles (3 each). Backward uses circuit_gradients() and chains the
    // encoding-angle gradients back to dir.
    VarId quantum(VarId dir, VarId angles, VarId cond_spatial = -1, VarId cond_directional = -1);

    // trilinear hash features of a point (or of a unit direction when
    // directional). Table gradients are scattered into table_grad, which must
    // match grid->table() in layout.
    VarId hash_encode(const HashGrid* grid, VarId point, double* table_grad,
                      bool directional = false);

    int size(VarId v) const;
    std::span<const double> value(VarId v) const;
    std::span<const double> grad(VarId v) const;

    // add upstream into the gradient slot of v before backward()
    void seed(VarId v, std::span<const double> upstream);
    void seed(VarId v, double upstream) { seed(v, std::span<const double>(&upstream, 1)); }

    // reverse sweep over every recorded node; exports param gradients
    void backward();

    // convenience for a scalar root: seeds 1 and runs backward()
    void backward_scalar(VarId root);

    size_t num_nodes() const { return nodes_.size(); }

private:
    enum class Op : uint8_t {
        Leaf, Param, Add, Sub, Mul, Div, Max, BMul, AddC, MulC,
        Exp, Log, Tanh, Erf, Sqrt, Sum, MatVec, Slice, Quantum, Hash
    };

    struct Node {
        Op op;
        VarId a = -1, b = -1;
        int size = 0;
        size_t off = 0;   // into the value/grad arena
        double c = 0.0;   // AddC/MulC constant, Slice offset
        int m = 0, n = 0; // MatVec dims
        VarId c1 = -1, c2 = -1;  // Quantum conditioning inputs
        const HashGrid* grid = nullptr;
        double* ext_grad = nullptr;  // Param export / Hash table grads
    };

    VarId push(Node n);
    double* val_ptr(VarId v) { return values_.data() + nodes_[size_t(v)].off; }
    const double* val_ptr(VarId v) const { return values_.data() + nodes_[size_t(v)].off; }
    double* grad_ptr(VarId v) { return grads_.data() + nodes_[size_t(v)].off; }

    void check_same_size(VarId a, VarId b, const char* what) const;
    [[noreturn]] void fail(VarId node, const std::string& msg) const;

    std::vector<Node> nodes_;
    std::vector<double> values_;
    std::vector<double> grads_;
};

// GeLU via erf: x * 0.5 * (1 + erf(x / sqrt(2)))
VarId gelu(Tape& t, VarId x);

// 2 * logistic(x), the bounded positive modulation activation
VarId sigmoid2(Tape& t, VarId x);

}  // namespace qgs
