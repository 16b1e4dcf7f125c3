#pragma once

#include <functional>
#include <string>
#include <vector>

#include "qgs/adam.hpp"
#include "qgs/rng.hpp"
#include "qgs/tape.hpp"

namespace qgs {

// Dense MLP whose forward pass is recorded on the tape. Hidden layers use
// GeLU; optional residual connections join consecutive equal-width hidden
// layers; optional dropout is applied to hidden activations while training.
// The final layer can be zero-initialized so the network starts as the
// constant-zero function (identity modulation after decode).
struct MlpConfig {
    std::vector<int> sizes;  // input, hidden..., output
    bool residual = false;
    double dropout = 0.0;
    bool zero_init_last = true;
};

class Mlp {
public:
    Mlp() = default;
    explicit Mlp(MlpConfig cfg);

    void init(Rng& rng);

    // Records the forward pass; dropout_rng null disables dropout (evaluation).
    VarId build(Tape& t, VarId input, Rng* dropout_rng) const;

    int input_dim() const { return cfg_.sizes.front(); }
    int output_dim() const { return cfg_.sizes.back(); }

    // final-layer bias, writable for output-slice-specific initialization
    std::vector<double>& last_bias() { return layers_.back().b; }

    void append_chunks(std::vector<ParamChunk>& out);
    // (name, values) in a fixed order, for checkpoints
    void visit(const std::string& prefix,
               const std::function<void(const std::string&, std::vector<double>&)>& fn);

    size_t param_count() const;

private:
    struct Layer {
        int in = 0, out = 0;
        std::vector<double> W, b;
        mutable std::vector<double> gW, gb;
    };
    MlpConfig cfg_;
    std::vector<Layer> layers_;
};

}  // namespace qgs
