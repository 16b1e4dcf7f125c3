#include "qgs/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace qgs {

Mlp::Mlp(MlpConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.sizes.size() < 2) throw std::invalid_argument("Mlp: need at least input and output");
    for (size_t i = 0; i + 1 < cfg_.sizes.size(); ++i) {
        Layer l;
        l.in = cfg_.sizes[i];
        l.out = cfg_.sizes[i + 1];
        l.W.assign(size_t(l.in) * l.out, 0.0);
        l.b.assign(size_t(l.out), 0.0);
        l.gW.assign(l.W.size(), 0.0);
        l.gb.assign(l.b.size(), 0.0);
        layers_.push_back(std::move(l));
    }
}

void Mlp::init(Rng& rng) {
    for (size_t li = 0; li < layers_.size(); ++li) {
        Layer& l = layers_[li];
        if (cfg_.zero_init_last && li + 1 == layers_.size()) {
            std::fill(l.W.begin(), l.W.end(), 0.0);
            std::fill(l.b.begin(), l.b.end(), 0.0);
            continue;
        }
        const double std_dev = std::sqrt(1.0 / double(l.in));
        for (double& w : l.W) w = rng.normal(0.0, std_dev);
        std::fill(l.b.begin(), l.b.end(), 0.0);
    }
}

VarId Mlp::build(Tape& t, VarId input, Rng* dropout_rng) const {
    if (t.size(input) != input_dim()) throw std::invalid_argument("Mlp: input size mismatch");
    VarId h = input;
    for (size_t li = 0; li < layers_.size(); ++li) {
        const Layer& l = layers_[li];
        const VarId w = t.param(l.W, l.gW.data());
        const VarId b = t.param(l.b, l.gb.data());
        VarId y = t.add(t.matvec(w, h, l.out, l.in), b);
        const bool hidden = li + 1 < layers_.size();
        if (!hidden) return y;
        y = gelu(t, y);
        if (cfg_.dropout > 0.0 && dropout_rng != nullptr) {
            std::vector<double> mask(size_t(l.out));
            const double keep = 1.0 - cfg_.dropout;
            for (double& m : mask) m = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
            y = t.mul(y, t.leaf(mask));
        }
        // residual join between equal-width hidden layers
        if (cfg_.residual && li > 0 && l.out == l.in) y = t.add(h, y);
        h = y;
    }
    return h;
}

void Mlp::append_chunks(std::vector<ParamChunk>& out) {
    for (Layer& l : layers_) {
        out.push_back({l.W.data(), l.gW.data(), l.W.size()});
        out.push_back({l.b.data(), l.gb.data(), l.b.size()});
    }
}

void Mlp::visit(const std::string& prefix,
                const std::function<void(const std::string&, std::vector<double>&)>& fn) {
    for (size_t li = 0; li < layers_.size(); ++li) {
        fn(prefix + ".layer" + std::to_string(li) + ".W", layers_[li].W);
        fn(prefix + ".layer" + std::to_string(li) + ".b", layers_[li].b);
    }
}

size_t Mlp::param_count() const {
    size_t n = 0;
    for (const Layer& l : layers_) n += l.W.size() + l.b.size();
    return n;
}

}  // namespace qgs
