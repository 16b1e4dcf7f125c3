// Command-line entry point: dataset generation, training, rendering,
// evaluation, gradient verification, directional-response maps, ablations.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qgs/checkpoint.hpp"
#include "qgs/dataset.hpp"
#include "qgs/image.hpp"
#include "qgs/kernels.hpp"
#include "qgs/metrics.hpp"
#include "qgs/trainer.hpp"

namespace fs = std::filesystem;
using namespace qgs;

namespace {

constexpr double kPi = 3.14159265358979323846;

uint64_t default_seed() {
    if (const char* env = std::getenv("QGS_SEED")) {
        try {
            return std::stoull(env);
        } catch (...) {
            std::fprintf(stderr, "[qgs] ignoring malformed QGS_SEED '%s'\n", env);
        }
    }
    return 1;
}

int default_threads() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : int(n);
}

std::string timestamp_run_dir(uint64_t seed) {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[64];
    std::strftime(buf, sizeof buf, "%Y%m%d_%H%M%S", std::localtime(&t));
    return std::string("runs/") + buf + "_" + std::to_string(seed);
}

void log_config(const Config& cfg) {
    std::fprintf(stderr, "[qgs] resolved configuration:\n");
    for (const auto& [k, v] : cfg.entries()) std::fprintf(stderr, "[qgs]   %s=%s\n", k.c_str(), v.c_str());
}

void apply_overrides(Config& cfg, const std::vector<std::string>& sets) {
    for (const std::string& s : sets) {
        const size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw CLI::ValidationError("--set", "expected key=value, got '" + s + "'");
        cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
}

void write_csv_row(std::ofstream& out, int64_t step, double psnr_v, double ssim_v, double l1_v,
                   double loss_v) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<long long>(step), psnr_v, ssim_v, l1_v, loss_v);
    out << buf;
}

struct TrainArgs {
    std::string data, out, config_path, resume, pipeline = "I", mode = "full";
    std::vector<std::string> sets;
    int64_t iters = -1;
    double lambda = -1.0;
    int64_t log_every = -1, checkpoint_every = -1;
    uint64_t seed = 1;
    int threads = 1;
};

int run_train(const TrainArgs& a) {
    const Dataset ds = load_dataset(a.data);

    TrainState st = [&] {
        if (!a.resume.empty()) {
            std::fprintf(stderr, "[qgs] resuming from %s\n", a.resume.c_str());
            return from_checkpoint(load_checkpoint(a.resume));
        }
        Config cfg = a.config_path.empty() ? Config{} : Config::load(a.config_path);
        cfg.set("pipeline", a.pipeline);
        cfg.set("mode", a.mode);
        if (a.iters >= 0) cfg.set("iters", a.iters);
        if (a.lambda >= 0) cfg.set("lambda", a.lambda);
        if (a.log_every > 0) cfg.set("log_every", a.log_every);
        if (a.checkpoint_every > 0) cfg.set("checkpoint_every", a.checkpoint_every);
        apply_overrides(cfg, a.sets);
        return TrainState::create(std::move(cfg), ds.scene, a.seed);
    }();
    if (!a.resume.empty() && a.iters >= 0) st.cfg.set("iters", a.iters);

    const std::string out_dir = a.out.empty() ? timestamp_run_dir(st.seed) : a.out;
    fs::create_directories(out_dir);
    log_config(st.cfg);
    st.cfg.save((fs::path(out_dir) / "resolved.cfg").string());

    const int64_t iters = st.cfg.get_int("iters");
    const int64_t log_every = st.cfg.get_int("log_every");
    const int64_t ck_every = st.cfg.get_int("checkpoint_every");

    std::ofstream csv((fs::path(out_dir) / "metrics.csv").string(), std::ios::trunc);
    csv << "step,psnr,ssim,l1,loss\n";

    if (st.iter >= iters) {
        // zero remaining work: still emit the checkpoint and evaluation
        std::fprintf(stderr, "[qgs] nothing to train (iter %lld >= iters %lld)\n",
                     static_cast<long long>(st.iter), static_cast<long long>(iters));
    }

    save_checkpoint(to_checkpoint(st), (fs::path(out_dir) / "checkpoint_initial.qgsc").string());

    while (st.iter < iters) {
        const StepStats stats = train_step(st, ds, a.threads);
        if (st.iter % log_every == 0 || st.iter == iters) {
            const Image& tgt = ds.targets[size_t(stats.view)];
            write_csv_row(csv, st.iter, psnr(stats.rendered, tgt), ssim(stats.rendered, tgt),
                          l1(stats.rendered, tgt), stats.loss_value);
            csv.flush();
        }
        if (st.iter % ck_every == 0 && st.iter < iters) {
            char name[64];
            std::snprintf(name, sizeof name, "checkpoint_%06lld.qgsc",
                          static_cast<long long>(st.iter));
            save_checkpoint(to_checkpoint(st), (fs::path(out_dir) / name).string());
            ModulationFactors f = st.factors_for(ds.cameras[0]);
            const RenderResult rr = render(st.scene, ds.cameras[0], st.render_options(a.threads),
                                           st.model ? &f : nullptr);
            std::snprintf(name, sizeof name, "preview_%06lld.ppm",
                          static_cast<long long>(st.iter));
            write_ppm(rr.rgb, (fs::path(out_dir) / name).string());
        }
    }
    save_checkpoint(to_checkpoint(st), (fs::path(out_dir) / "checkpoint_final.qgsc").string());

    const EvalStats es = evaluate(st, ds, a.threads);
    std::ofstream ecsv((fs::path(out_dir) / "eval.csv").string(), std::ios::trunc);
    ecsv << "view,psnr,ssim,l1\n";
    for (const EvalRow& r : es.rows) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", r.view, r.psnr_v, r.ssim_v,
                      r.l1_v);
        ecsv << buf;
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "mean,%.17g,%.17g,%.17g\n", es.psnr_mean, es.ssim_mean,
                  es.l1_mean);
    ecsv << buf;
    std::fprintf(stderr, "[qgs] trained %lld iters; mean psnr %.3f dB, ssim %.4f\n",
                 static_cast<long long>(st.iter), es.psnr_mean, es.ssim_mean);
    return 0;
}

int run_eval(const std::string& ckpt, const std::string& data, const std::string& out_csv,
             int threads) {
    const Dataset ds = load_dataset(data);
    TrainState st = from_checkpoint(load_checkpoint(ckpt));
    const EvalStats es = evaluate(st, ds, threads);
    std::ofstream csv(out_csv, std::ios::trunc);
    csv << "view,psnr,ssim,l1\n";
    for (const EvalRow& r : es.rows) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", r.view, r.psnr_v, r.ssim_v,
                      r.l1_v);
        csv << buf;
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "mean,%.17g,%.17g,%.17g\n", es.psnr_mean, es.ssim_mean,
                  es.l1_mean);
    csv << buf;
    std::printf("mean_psnr=%.6f mean_ssim=%.6f mean_l1=%.8f\n", es.psnr_mean, es.ssim_mean,
                es.l1_mean);
    return 0;
}

int run_render(const std::string& ckpt, const std::string& data, int view, bool all,
               const std::string& out_dir, bool png, int threads) {
    const Dataset ds = load_dataset(data);
    TrainState st = from_checkpoint(load_checkpoint(ckpt));
    fs::create_directories(out_dir);
    const RenderOptions opt = st.render_options(threads);
    auto emit = [&](int v) {
        ModulationFactors f = st.factors_for(ds.cameras[size_t(v)]);
        const RenderResult rr = render(st.scene, ds.cameras[size_t(v)], opt,
                                       st.model ? &f : nullptr);
        char name[64];
        std::snprintf(name, sizeof name, "view_%03d.ppm", v);
        write_ppm(rr.rgb, (fs::path(out_dir) / name).string());
        if (png) {
            std::snprintf(name, sizeof name, "view_%03d.png", v);
            write_png(rr.rgb, (fs::path(out_dir) / name).string());
        }
    };
    if (all)
        for (size_t v = 0; v < ds.cameras.size(); ++v) emit(int(v));
    else {
        if (view < 0 || view >= int(ds.cameras.size()))
            throw std::invalid_argument("view index out of range");
        emit(view);
    }
    return 0;
}

int run_gradcheck(const std::string& pipeline, uint64_t seed, int samples, double fd_h,
                  bool perturb, const std::string& corrupt_group) {
    Config cfg;
    cfg.set("pipeline", pipeline);
    const GradcheckReport rep = gradcheck(cfg, seed, samples, fd_h, corrupt_group, perturb);
    for (const GradcheckGroup& g : rep.groups) {
        std::printf("%-16s max_rel_err %.3e over %d probes  %s\n", g.name.c_str(), g.max_rel_err,
                    g.samples, g.max_rel_err <= rep.threshold ? "PASS" : "FAIL");
    }
    if (!rep.passed()) {
        std::printf("FAIL: group %s exceeds %.0e\n", rep.worst_group().c_str(), rep.threshold);
        return 2;
    }
    std::printf("PASS: all groups within %.0e\n", rep.threshold);
    return 0;
}

int run_dirmap(const std::string& ckpt, int gaussian, int width, int height,
               const std::string& out_path, bool png) {
    TrainState st = from_checkpoint(load_checkpoint(ckpt));
    if (!st.model) throw std::invalid_argument("checkpoint has no modulation network");
    if (gaussian < 0 || gaussian >= int(st.scene.gaussians.size()))
        throw std::invalid_argument("gaussian index out of range");
    const Gaussian& g = st.scene.gaussians[size_t(gaussian)];
    Scene one;
    one.bounds_lo = st.scene.bounds_lo;
    one.bounds_hi = st.scene.bounds_hi;
    one.gaussians.push_back(g);

    Image img(width, height);
    for (int row = 0; row < height; ++row) {
        const double theta = kPi * (row + 0.5) / height;
        for (int col = 0; col < width; ++col) {
            const double phi = 2.0 * kPi * (col + 0.5) / width;
            const Vec3 d{std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                         std::cos(theta)};
            const ModulationFactors f = st.model->eval_factors(one, g.mu - d);
            const Vec3 c = modulated_color(g, f[0], st.model->config().mode, d);
            double* px = img.at(col, row);
            px[0] = c.x;
            px[1] = c.y;
            px[2] = c.z;
        }
    }
    if (png) write_png(img, out_path);
    else write_ppm(img, out_path);
    std::fprintf(stderr, "[qgs] wrote %dx%d response map to %s\n", width, height,
                 out_path.c_str());
    return 0;
}

int run_ablate(const std::string& data, const std::string& out_dir, int64_t iters, uint64_t seed,
               const std::string& pipeline, int threads,
               const std::vector<std::string>& sets) {
    const Dataset ds = load_dataset(data);
    fs::create_directories(out_dir);
    std::ofstream csv((fs::path(out_dir) / "ablate.csv").string(), std::ios::trunc);
    csv << "variant,psnr,ssim,l1\n";
    for (const std::string mode : {"no_sh", "only_opacity", "only_sh", "full"}) {
        Config cfg;
        cfg.set("pipeline", pipeline);
        cfg.set("mode", mode);
        cfg.set("iters", iters);
        apply_overrides(cfg, sets);
        TrainState st = TrainState::create(std::move(cfg), ds.scene, seed);
        while (st.iter < iters) train_step(st, ds, threads);
        const EvalStats es = evaluate(st, ds, threads);
        char buf[200];
        std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g\n", mode.c_str(), es.psnr_mean,
                      es.ssim_mean, es.l1_mean);
        csv << buf;
        csv.flush();
        std::fprintf(stderr, "[qgs] ablate %-13s psnr %.3f ssim %.4f\n", mode.c_str(),
                     es.psnr_mean, es.ssim_mean);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"quantum-modulated gaussian splatting workbench"};
    app.require_subcommand(1);

    uint64_t seed = default_seed();
    int threads = default_threads();
    app.add_option("--seed", seed, "global RNG seed (QGS_SEED overrides the default)");
    app.add_option("--threads", threads, "worker pool width");

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    gen->fallthrough();
    std::string gen_out, gen_kind = "step_lobe";
    int gen_gaussians = 8, gen_views = 16, gen_size = 64;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--kind", gen_kind, "sh_smooth | step_lobe | specular_spot");
    gen->add_option("--gaussians", gen_gaussians, "number of gaussians")->check(CLI::PositiveNumber);
    gen->add_option("--views", gen_views, "camera ring size");
    gen->add_option("--size", gen_size, "image width and height");

    // train
    auto* train = app.add_subcommand("train", "optimize a scene against a dataset");
    train->fallthrough();
    TrainArgs ta;
    train->add_option("--data", ta.data, "dataset directory")->required();
    train->add_option("--out", ta.out, "run directory (default runs/<timestamp>_<seed>)");
    train->add_option("--pipeline", ta.pipeline, "I | II | none (SH-only baseline)");
    train->add_option("--mode", ta.mode, "full | only_opacity | only_sh | no_sh");
    train->add_option("--iters", ta.iters, "total optimization steps");
    train->add_option("--lambda", ta.lambda, "D-SSIM weight in the loss");
    train->add_option("--config", ta.config_path, "run configuration file");
    train->add_option("--set", ta.sets, "config override key=value (repeatable)");
    train->add_option("--resume", ta.resume, "checkpoint to resume from");
    train->add_option("--log-every", ta.log_every, "metrics row cadence");
    train->add_option("--checkpoint-every", ta.checkpoint_every, "checkpoint cadence");

    // render
    auto* rend = app.add_subcommand("render", "render views from a checkpoint");
    rend->fallthrough();
    std::string r_ckpt, r_data, r_out = "render_out";
    int r_view = 0;
    bool r_all = false, r_png = false;
    rend->add_option("--checkpoint", r_ckpt)->required();
    rend->add_option("--data", r_data, "dataset directory (cameras)")->required();
    rend->add_option("--view", r_view, "view index");
    rend->add_flag("--all", r_all, "render every view");
    rend->add_option("--out", r_out, "output directory");
    rend->add_flag("--png", r_png, "additionally write PNG");

    // eval
    auto* ev = app.add_subcommand("eval", "metrics of a checkpoint against a dataset");
    ev->fallthrough();
    std::string e_ckpt, e_data, e_out = "eval.csv";
    ev->add_option("--checkpoint", e_ckpt)->required();
    ev->add_option("--data", e_data)->required();
    ev->add_option("--out", e_out, "CSV path");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "analytic vs finite-difference gradients");
    gc->fallthrough();
    std::string gc_pipeline = "I", gc_corrupt;
    int gc_samples = 200;
    double gc_h = 1e-5;
    bool gc_perturb = false;
    gc->add_option("--pipeline", gc_pipeline, "I | II");
    gc->add_option("--samples", gc_samples, "finite-difference probes per group");
    gc->add_option("--fd-h", gc_h, "central-difference step");
    gc->add_flag("--perturb", gc_perturb, "randomize parameters before checking");
    gc->add_option("--corrupt-group", gc_corrupt,
                   "test hook: damage this group's analytic gradient");

    // dirmap
    auto* dm = app.add_subcommand("dirmap", "equirectangular directional response map");
    dm->fallthrough();
    std::string dm_ckpt, dm_out = "dirmap.ppm";
    int dm_gaussian = 0, dm_w = 64, dm_h = 32;
    bool dm_png = false;
    dm->add_option("--checkpoint", dm_ckpt)->required();
    dm->add_option("--gaussian", dm_gaussian, "gaussian index");
    dm->add_option("--width", dm_w);
    dm->add_option("--height", dm_h);
    dm->add_option("--out", dm_out, "output image path");
    dm->add_flag("--png", dm_png, "write PNG instead of PPM");

    // ablate
    auto* ab = app.add_subcommand("ablate", "train every modulation variant");
    ab->fallthrough();
    std::string ab_data, ab_out = "ablate_out", ab_pipeline = "I";
    int64_t ab_iters = 2000;
    std::vector<std::string> ab_sets;
    ab->add_option("--data", ab_data)->required();
    ab->add_option("--out", ab_out);
    ab->add_option("--iters", ab_iters);
    ab->add_option("--pipeline", ab_pipeline, "I | II");
    ab->add_option("--set", ab_sets, "config override key=value (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // usage errors exit 1, --help exits 0
    }

    std::fprintf(stderr, "[qgs] kernels: %s, threads: %d, seed: %llu\n",
                 kernels::active().name, threads, static_cast<unsigned long long>(seed));

    try {
        if (*gen) {
            const Dataset ds =
                generate_scene(gen_gaussians, target_kind_from_name(gen_kind), seed, gen_views,
                               gen_size);
            save_dataset(ds, gen_out);
            std::fprintf(stderr, "[qgs] wrote dataset (%d gaussians, %d views, %dx%d) to %s\n",
                         gen_gaussians, gen_views, gen_size, gen_size, gen_out.c_str());
            return 0;
        }
        if (*train) {
            ta.seed = seed;
            ta.threads = threads;
            return run_train(ta);
        }
        if (*rend) return run_render(r_ckpt, r_data, r_view, r_all, r_out, r_png, threads);
        if (*ev) return run_eval(e_ckpt, e_data, e_out, threads);
        if (*gc) return run_gradcheck(gc_pipeline, seed, gc_samples, gc_h, gc_perturb, gc_corrupt);
        if (*dm) return run_dirmap(dm_ckpt, dm_gaussian, dm_w, dm_h, dm_out, dm_png);
        if (*ab) return run_ablate(ab_data, ab_out, ab_iters, seed, ab_pipeline, threads, ab_sets);
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "[qgs] numerical failure: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "[qgs] error: %s\n", e.what());
        return 1;
    }
    return 1;
}
