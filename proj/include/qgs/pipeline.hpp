#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "qgs/hashgrid.hpp"
#include "qgs/mlp.hpp"
#include "qgs/renderer.hpp"
#include "qgs/scene.hpp"
#include "qgs/tape.hpp"

namespace qgs {

// Bounded positive modulation factors from raw network outputs:
// factor_i = 2 * logistic(raw_i), in (0, 2), exactly 1 at raw 0.
std::vector<double> decode(std::span<const double> raw, ModulationMode mode);

struct PipelineConfig {
    int pipeline = 1;  // 1: per-Gaussian hypernetwork, 2: global conditioning
    int ansatz_layers = 4;
    ModulationMode mode = ModulationMode::Full;
    HashGridConfig spatial_grid;
    HashGridConfig dir_grid;  // pipeline II only
    int hyper_hidden = 64;
    int proj_hidden = 64;
    double dropout = 0.1;

    int n_out() const { return modulation_n_out(mode); }
    // ansatz angles + generated decoder: W1(3x3), b1(3), W2(n_out x 3), b2(n_out)
    int hyper_out_dim() const { return 6 * ansatz_layers + 12 + 4 * n_out(); }
};

// The view-dependent modulation network. Pipeline I generates per-Gaussian
// ansatz angles and decoder weights from the spatial hash features via the
// hypernetwork; pipeline II conditions one global circuit with projected
// spatial and directional hash features and decodes through a shared MLP.
//
// Hypernetwork output layout: [6L ansatz angles (layer-major, per qubit
// theta then phi)] [W1 row-major 3x3] [b1 3] [W2 row-major n_out x 3]
// [b2 n_out].
class QmlpModel {
public:
    explicit QmlpModel(PipelineConfig cfg);

    void init(Rng& rng);

    const PipelineConfig& config() const { return cfg_; }

    struct Build {
        std::vector<VarId> factors;  // one per gaussian, length n_out
    };

    // Records modulation factors for every gaussian on the tape. When
    // mu_grad is non-null it must hold 3*N doubles and receives the
    // dL/dmu contributions that flow through the hash encoding and the
    // circuit's direction input.
    Build build(Tape& t, const Scene& scene, Vec3 cam_position, bool training,
                Rng* dropout_rng, double* mu_grad) const;

    // Evaluation-mode factors (no dropout, no gradients).
    ModulationFactors eval_factors(const Scene& scene, Vec3 cam_position) const;

    // Pipeline I: the per-Gaussian circuit angles and decoder weights the
    // hypernetwork emits for a position (see the layout note above).
    struct GeneratedDecoder {
        AnsatzParams angles;
        std::vector<double> w1, b1, w2, b2;  // w row-major
    };
    GeneratedDecoder hypernet_generate(Vec3 mu) const;

    void zero_grads();

    // named parameter sets for the optimizer groups
    std::vector<std::pair<std::string, std::vector<ParamChunk>>> param_sets();

    // named tensors for checkpointing, fixed order
    void visit(const std::function<void(const std::string&, std::vector<double>&)>& fn);

private:
    PipelineConfig cfg_;
    HashGrid spatial_grid_;
    HashGrid dir_grid_;
    mutable std::vector<double> spatial_grad_;
    mutable std::vector<double> dir_grad_;
    Mlp hypernet_;      // pipeline I
    Mlp proj_spatial_;  // pipeline II
    Mlp proj_dir_;      // pipeline II
    Mlp decoder_;       // pipeline II (per-Gaussian decoders are generated in I)
    std::vector<double> global_angles_;
    mutable std::vector<double> global_angles_grad_;
};

}  // namespace qgs
