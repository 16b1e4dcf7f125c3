#include "qgs/adam.hpp"

#include <cmath>
#include <cstdio>

namespace qgs {

bool adam_step(ParamGroup& group, const AdamConfig& cfg) {
    if (group.m.size() != group.total()) group.init_state();

    for (const ParamChunk& c : group.chunks) {
        for (size_t i = 0; i < c.n; ++i) {
            if (!std::isfinite(c.g[i])) {
                std::fprintf(stderr, "[qgs] non-finite gradient in group '%s', update skipped\n",
                             group.name.c_str());
                return false;
            }
        }
    }

    group.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(group.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(group.step));
    size_t k = 0;
    for (const ParamChunk& c : group.chunks) {
        for (size_t i = 0; i < c.n; ++i, ++k) {
            const double g = c.g[i];
            group.m[k] = cfg.beta1 * group.m[k] + (1.0 - cfg.beta1) * g;
            group.v[k] = cfg.beta2 * group.v[k] + (1.0 - cfg.beta2) * g * g;
            const double mhat = group.m[k] / bc1;
            const double vhat = group.v[k] / bc2;
            c.p[i] -= group.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
    return true;
}

}  // namespace qgs
