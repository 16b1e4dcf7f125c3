#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qgs/adam.hpp"
#include "qgs/checkpoint.hpp"
#include "qgs/config.hpp"
#include "qgs/dataset.hpp"
#include "qgs/metrics.hpp"
#include "qgs/pipeline.hpp"
#include "qgs/renderer.hpp"

namespace qgs {

// Raised when a training step produces a non-finite loss; the CLI maps it to
// exit code 2 and keeps the last good checkpoint.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Substream tags; training draws only from (seed, tag, iter) so a resumed
// run replays the exact trajectory of an uninterrupted one.
inline constexpr uint64_t kTagInit = 0x696e6974ull;
inline constexpr uint64_t kTagView = 0x76696577ull;
inline constexpr uint64_t kTagDropout = 0x64726f70ull;
inline constexpr uint64_t kTagGradcheck = 0x67636b31ull;
inline constexpr uint64_t kTagDirFit = 0x64666974ull;

// Materializes every tunable the run depends on so the logged config is the
// full provenance record. pipeline is "I", "II" or "none" (plain SH).
void resolve_config(Config& cfg);

PipelineConfig pipeline_config_from(const Config& cfg, const Scene& scene);

struct TrainState {
    Config cfg;
    Scene scene;
    std::unique_ptr<QmlpModel> model;  // null for the SH-only baseline

    // flat gradient buffers for the gaussian attributes
    std::vector<double> g_mu, g_rot, g_scale, g_logit, g_sh;
    std::vector<ParamGroup> groups;
    uint64_t seed = 0;
    int64_t iter = 0;

    static TrainState create(Config cfg, const Scene& scene, uint64_t seed);
    void zero_grads();
    RenderOptions render_options(int threads) const;
    ModulationFactors factors_for(const Camera& cam) const;  // evaluation mode
};

struct StepStats {
    double loss_value = 0.0;
    int view = 0;
    Image rendered;
};

// One deterministic optimization step (view choice, dropout masks and the
// update depend only on state and its counters). Throws on non-finite loss.
StepStats train_step(TrainState& st, const Dataset& ds, int threads);

struct EvalRow {
    int view;
    double psnr_v, ssim_v, l1_v;
};
struct EvalStats {
    std::vector<EvalRow> rows;
    double psnr_mean = 0.0, ssim_mean = 0.0, l1_mean = 0.0;
};
EvalStats evaluate(const TrainState& st, const Dataset& ds, int threads);

Checkpoint to_checkpoint(const TrainState& st);
TrainState from_checkpoint(const Checkpoint& ck);

// ---- gradient verification -------------------------------------------------

struct GradcheckGroup {
    std::string name;
    double max_rel_err = 0.0;
    int samples = 0;
};
struct GradcheckReport {
    std::vector<GradcheckGroup> groups;
    double threshold = 1e-3;
    bool passed() const;
    std::string worst_group() const;
};

// Compares every parameter group's analytic gradient against central finite
// differences of the full loss on a small built-in scene (2 gaussians, 8x8).
// corrupt_group non-empty deliberately damages that group's analytic gradient
// (negative-test hook). perturb randomizes parameters before checking.
GradcheckReport gradcheck(const Config& cfg, uint64_t seed, int samples_per_group, double fd_h,
                          const std::string& corrupt_group, bool perturb);

// ---- single-gaussian directional fit ----------------------------------------

struct SphereQuad {
    std::vector<Vec3> dirs;
    std::vector<double> weights;  // sums to 1 (uniform sphere measure)
};
SphereQuad sphere_quadrature(int n_z, int n_phi);

// Mean squared directional error of the modulated color response of
// gaussian 0 against the analytic target, over the quadrature grid.
double directional_fit_mse(const QmlpModel& model, const Scene& scene,
                           const DirectionalTarget& target, const SphereQuad& quad);

// Trains gaussian-0 SH plus the modulation network to regress the target
// response over random direction batches.
void train_directional_fit(QmlpModel& model, Scene& scene, const DirectionalTarget& target,
                           const Config& cfg, uint64_t seed, int steps, int batch);

// Modulated color response of one gaussian seen from direction d.
Vec3 modulated_color(const Gaussian& g, const std::vector<double>& factors, ModulationMode mode,
                     Vec3 d);

}  // namespace qgs
