#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qgs/scene.hpp"

namespace qgs {

// On-disk training snapshot (.qgsc): run config text, scene payload, named
// parameter tensors, per-group Adam state, RNG seed and step counter.
// Round trips are bit-exact; resuming reproduces the training trajectory.
struct Checkpoint {
    std::string config_text;
    Scene scene;
    std::vector<std::pair<std::string, std::vector<double>>> tensors;

    struct AdamSnap {
        std::string name;
        std::vector<double> m, v;
        int64_t step = 0;
    };
    std::vector<AdamSnap> adam;

    uint64_t seed = 0;
    int64_t iter = 0;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace qgs
