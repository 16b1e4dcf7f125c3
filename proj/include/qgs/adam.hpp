#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qgs {

// Bias-corrected Adam over named parameter groups. Each group owns its moment
// estimates and step counter; a group whose gradient contains a non-finite
// value is skipped for that step (logged to stderr).

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct ParamChunk {
    double* p = nullptr;
    double* g = nullptr;
    size_t n = 0;
};

struct ParamGroup {
    std::string name;
    double lr = 1e-3;
    std::vector<ParamChunk> chunks;

    std::vector<double> m;  // first moments, chunk-concatenated
    std::vector<double> v;  // second moments
    int64_t step = 0;

    size_t total() const {
        size_t t = 0;
        for (const ParamChunk& c : chunks) t += c.n;
        return t;
    }

    void init_state() {
        m.assign(total(), 0.0);
        v.assign(total(), 0.0);
        step = 0;
    }

    void zero_grads() {
        for (ParamChunk& c : chunks)
            for (size_t i = 0; i < c.n; ++i) c.g[i] = 0.0;
    }
};

// Applies one update; returns false if the group was skipped (non-finite grad).
bool adam_step(ParamGroup& group, const AdamConfig& cfg = {});

}  // namespace qgs
