#include "qgs/pipeline.hpp"

#include <cmath>
#include <stdexcept>

namespace qgs {

std::vector<double> decode(std::span<const double> raw, ModulationMode mode) {
    if (int(raw.size()) != modulation_n_out(mode))
        throw std::invalid_argument("decode: raw length does not match the modulation mode");
    std::vector<double> f(raw.size());
    for (size_t i = 0; i < raw.size(); ++i) f[i] = 2.0 / (1.0 + std::exp(-raw[i]));
    return f;
}

QmlpModel::QmlpModel(PipelineConfig cfg)
    : cfg_(cfg), spatial_grid_(cfg.spatial_grid), dir_grid_(cfg.dir_grid) {
    spatial_grad_.assign(spatial_grid_.table().size(), 0.0);
    const int feat = cfg_.spatial_grid.output_dim();
    if (cfg_.pipeline == 1) {
        hypernet_ = Mlp({{feat, cfg_.hyper_hidden, cfg_.hyper_hidden, cfg_.hyper_out_dim()},
                         /*residual=*/true, cfg_.dropout, /*zero_init_last=*/true});
    } else if (cfg_.pipeline == 2) {
        dir_grad_.assign(dir_grid_.table().size(), 0.0);
        proj_spatial_ = Mlp({{feat, cfg_.proj_hidden, cfg_.proj_hidden, 3},
                             false, 0.0, true});
        proj_dir_ = Mlp({{cfg_.dir_grid.output_dim(), cfg_.proj_hidden, cfg_.proj_hidden, 3},
                         false, 0.0, true});
        decoder_ = Mlp({{3, 3, cfg_.n_out()}, false, 0.0, true});
        global_angles_.assign(size_t(6) * cfg_.ansatz_layers, 0.0);
        global_angles_grad_.assign(global_angles_.size(), 0.0);
    } else {
        throw std::invalid_argument("QmlpModel: pipeline must be 1 or 2");
    }
}

void QmlpModel::init(Rng& rng) {
    spatial_grid_.init_uniform(rng);
    if (cfg_.pipeline == 1) {
        hypernet_.init(rng);
        // The generated decoder must not start with both layers zero: that is
        // a saddle where neither its weights nor the circuit angles receive
        // gradient. Seeding the bias slots that emit the decoder's hidden
        // weights keeps the factors exactly 1 at init (W2 and b2 stay zero)
        // while making the output layer trainable from step one.
        std::vector<double>& b = hypernet_.last_bias();
        const int w1_off = 6 * cfg_.ansatz_layers;
        const double std_dev = std::sqrt(1.0 / 3.0);
        for (int i = 0; i < 9; ++i) b[size_t(w1_off + i)] = rng.normal(0.0, std_dev);
    } else {
        dir_grid_.init_uniform(rng);
        proj_spatial_.init(rng);
        proj_dir_.init(rng);
        decoder_.init(rng);
        std::fill(global_angles_.begin(), global_angles_.end(), 0.0);
    }
}

QmlpModel::Build QmlpModel::build(Tape& t, const Scene& scene, Vec3 cam_position, bool training,
                                  Rng* dropout_rng, double* mu_grad) const {
    Build out;
    const int L = cfg_.ansatz_layers;
    const int n_out = cfg_.n_out();
    const double campos[3] = {cam_position.x, cam_position.y, cam_position.z};

    for (size_t gi = 0; gi < scene.gaussians.size(); ++gi) {
        const Gaussian& g = scene.gaussians[gi];
        const double mu[3] = {g.mu.x, g.mu.y, g.mu.z};
        const VarId v_mu = mu_grad != nullptr ? t.param({mu, 3}, mu_grad + 3 * gi)
                                              : t.leaf({mu, 3});

        // unit view direction, recorded so its gradient reaches mu
        const VarId diff = t.sub(v_mu, t.leaf({campos, 3}));
        const VarId r = t.sqrt(t.sum(t.mul(diff, diff)));
        const VarId v_dir = t.bmul(diff, t.div(t.leaf(1.0), r));

        const VarId feat = t.hash_encode(&spatial_grid_, v_mu, spatial_grad_.data());

        VarId raw;
        if (cfg_.pipeline == 1) {
            const VarId hyp = hypernet_.build(t, feat, training ? dropout_rng : nullptr);
            const VarId angles = t.slice(hyp, 0, 6 * L);
            const VarId w1 = t.slice(hyp, 6 * L, 9);
            const VarId b1 = t.slice(hyp, 6 * L + 9, 3);
            const VarId w2 = t.slice(hyp, 6 * L + 12, 3 * n_out);
            const VarId b2 = t.slice(hyp, 6 * L + 12 + 3 * n_out, n_out);
            const VarId z = t.quantum(v_dir, angles);
            const VarId h = gelu(t, t.add(t.matvec(w1, z, 3, 3), b1));
            raw = t.add(t.matvec(w2, h, n_out, 3), b2);
        } else {
            const VarId dfeat = t.hash_encode(&dir_grid_, v_dir, dir_grad_.data(),
                                              /*directional=*/true);
            const VarId cond_s = proj_spatial_.build(t, feat, nullptr);
            const VarId cond_v = proj_dir_.build(t, dfeat, nullptr);
            const VarId angles = t.param(global_angles_, global_angles_grad_.data());
            const VarId z = t.quantum(v_dir, angles, cond_s, cond_v);
            raw = decoder_.build(t, z, nullptr);
        }
        out.factors.push_back(sigmoid2(t, raw));
    }
    return out;
}

QmlpModel::GeneratedDecoder QmlpModel::hypernet_generate(Vec3 mu) const {
    if (cfg_.pipeline != 1)
        throw std::logic_error("hypernet_generate: only the per-Gaussian pipeline has one");
    Tape t;
    const double p[3] = {mu.x, mu.y, mu.z};
    const VarId feat = t.hash_encode(&spatial_grid_, t.leaf({p, 3}), spatial_grad_.data());
    const VarId hyp = hypernet_.build(t, feat, nullptr);
    const auto v = t.value(hyp);
    const int L = cfg_.ansatz_layers;
    const int n_out = cfg_.n_out();
    GeneratedDecoder out;
    out.angles.num_layers = L;
    out.angles.angles.assign(v.begin(), v.begin() + 6 * L);
    out.w1.assign(v.begin() + 6 * L, v.begin() + 6 * L + 9);
    out.b1.assign(v.begin() + 6 * L + 9, v.begin() + 6 * L + 12);
    out.w2.assign(v.begin() + 6 * L + 12, v.begin() + 6 * L + 12 + 3 * n_out);
    out.b2.assign(v.begin() + 6 * L + 12 + 3 * n_out, v.end());
    return out;
}

ModulationFactors QmlpModel::eval_factors(const Scene& scene, Vec3 cam_position) const {
    Tape t;
    const Build b = build(t, scene, cam_position, /*training=*/false, nullptr, nullptr);
    ModulationFactors f;
    f.reserve(b.factors.size());
    for (VarId v : b.factors) {
        const auto vals = t.value(v);
        f.emplace_back(vals.begin(), vals.end());
    }
    return f;
}

void QmlpModel::zero_grads() {
    std::fill(spatial_grad_.begin(), spatial_grad_.end(), 0.0);
    std::fill(dir_grad_.begin(), dir_grad_.end(), 0.0);
    std::fill(global_angles_grad_.begin(), global_angles_grad_.end(), 0.0);
    std::vector<ParamChunk> chunks;
    hypernet_.append_chunks(chunks);
    proj_spatial_.append_chunks(chunks);
    proj_dir_.append_chunks(chunks);
    decoder_.append_chunks(chunks);
    for (ParamChunk& c : chunks)
        for (size_t i = 0; i < c.n; ++i) c.g[i] = 0.0;
}

std::vector<std::pair<std::string, std::vector<ParamChunk>>> QmlpModel::param_sets() {
    std::vector<std::pair<std::string, std::vector<ParamChunk>>> sets;
    {
        std::vector<ParamChunk> hash{{spatial_grid_.table().data(), spatial_grad_.data(),
                                      spatial_grid_.table().size()}};
        sets.emplace_back("hash", std::move(hash));
    }
    if (cfg_.pipeline == 1) {
        std::vector<ParamChunk> net;
        hypernet_.append_chunks(net);
        sets.emplace_back("hypernet", std::move(net));
    } else {
        std::vector<ParamChunk> dhash{{dir_grid_.table().data(), dir_grad_.data(),
                                       dir_grid_.table().size()}};
        sets.emplace_back("hash_dir", std::move(dhash));
        std::vector<ParamChunk> proj;
        proj_spatial_.append_chunks(proj);
        proj_dir_.append_chunks(proj);
        sets.emplace_back("proj", std::move(proj));
        std::vector<ParamChunk> quantum{{global_angles_.data(), global_angles_grad_.data(),
                                         global_angles_.size()}};
        decoder_.append_chunks(quantum);
        sets.emplace_back("quantum", std::move(quantum));
    }
    return sets;
}

void QmlpModel::visit(const std::function<void(const std::string&, std::vector<double>&)>& fn) {
    fn("spatial_table", spatial_grid_.table());
    if (cfg_.pipeline == 1) {
        hypernet_.visit("hypernet", fn);
    } else {
        fn("dir_table", dir_grid_.table());
        proj_spatial_.visit("proj_spatial", fn);
        proj_dir_.visit("proj_dir", fn);
        decoder_.visit("decoder", fn);
        fn("global_angles", global_angles_);
    }
}

}  // namespace qgs
