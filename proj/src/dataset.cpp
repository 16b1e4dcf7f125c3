#include "qgs/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <cstring>
#include <stdexcept>

#include "qgs/binio.hpp"
#include "qgs/config.hpp"
#include "qgs/renderer.hpp"
#include "qgs/sh.hpp"

namespace qgs {

namespace {

constexpr double kPi = 3.14159265358979323846;

double logit(double p) { return std::log(p / (1.0 - p)); }

uint8_t quantize(double v) { return uint8_t(std::lround(clamp01(v) * 255.0)); }

// One generator draw per gaussian. load_dataset() replays this to recover the
// directional responses, so the draw order here is part of the dataset format.
Gaussian draw_gaussian(Rng& rng) {
    Gaussian g;
    g.mu = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
    g.rot = rng.unit_quat();
    for (int c = 0; c < 3; ++c) g.log_scale[c] = std::log(rng.uniform(0.10, 0.22));
    g.opacity_logit = logit(rng.uniform(0.55, 0.9));
    // DC-only color init; view dependence is what training has to learn
    for (int ch = 0; ch < 3; ++ch)
        g.sh[size_t(ch) * 16] = (rng.uniform(0.25, 0.75) - 0.5) / 0.28209479177387814;
    return g;
}

}  // namespace

TargetKind target_kind_from_name(const std::string& s) {
    if (s == "sh_smooth") return TargetKind::ShSmooth;
    if (s == "step_lobe") return TargetKind::StepLobe;
    if (s == "specular_spot") return TargetKind::SpecularSpot;
    throw std::invalid_argument("unknown target kind: " + s);
}

std::string target_kind_name(TargetKind k) {
    switch (k) {
        case TargetKind::ShSmooth: return "sh_smooth";
        case TargetKind::StepLobe: return "step_lobe";
        case TargetKind::SpecularSpot: return "specular_spot";
    }
    return "?";
}

Vec3 DirectionalTarget::eval(Vec3 d) const {
    switch (kind) {
        case TargetKind::ShSmooth:
            // same convention as the renderer so the model class contains it
            return eval_sh({sh.data(), sh.size()}, d, 3);
        case TargetKind::StepLobe:
            return dot(d, axis) > cos_cap ? inside : outside;
        case TargetKind::SpecularSpot: {
            const double w = std::exp(kappa * (dot(d, axis) - 1.0));
            return Vec3{clamp01(outside.x + (inside.x - outside.x) * w),
                        clamp01(outside.y + (inside.y - outside.y) * w),
                        clamp01(outside.z + (inside.z - outside.z) * w)};
        }
    }
    return {};
}

DirectionalTarget make_step_lobe(Vec3 axis, double half_angle_rad, Vec3 inside, Vec3 outside) {
    DirectionalTarget t;
    t.kind = TargetKind::StepLobe;
    t.axis = normalized(axis);
    t.cos_cap = std::cos(half_angle_rad);
    t.inside = inside;
    t.outside = outside;
    return t;
}

DirectionalTarget make_specular_spot(Vec3 axis, double kappa, Vec3 inside, Vec3 outside) {
    DirectionalTarget t;
    t.kind = TargetKind::SpecularSpot;
    t.axis = normalized(axis);
    t.kappa = kappa;
    t.inside = inside;
    t.outside = outside;
    return t;
}

DirectionalTarget random_target(TargetKind kind, Rng& rng) {
    DirectionalTarget t;
    t.kind = kind;
    t.axis = rng.unit_vector();
    switch (kind) {
        case TargetKind::StepLobe:
            t.cos_cap = std::cos(rng.uniform(55.0, 115.0) * kPi / 180.0);
            for (int ch = 0; ch < 3; ++ch) {
                (&t.inside.x)[ch] = rng.uniform(0.6, 0.95);
                (&t.outside.x)[ch] = rng.uniform(0.05, 0.35);
            }
            break;
        case TargetKind::SpecularSpot:
            t.kappa = 100.0;
            for (int ch = 0; ch < 3; ++ch) {
                (&t.inside.x)[ch] = rng.uniform(0.7, 1.0);
                (&t.outside.x)[ch] = rng.uniform(0.1, 0.4);
            }
            break;
        case TargetKind::ShSmooth:
            for (int ch = 0; ch < 3; ++ch) {
                t.sh[size_t(ch) * 16] = (rng.uniform(0.3, 0.7) - 0.5) / 0.28209479177387814;
                for (int k = 1; k < 16; ++k)
                    t.sh[size_t(ch) * 16 + size_t(k)] = rng.normal(0.0, 0.12);
            }
            break;
    }
    return t;
}

Image render_target_view(const Scene& scene, const std::vector<DirectionalTarget>& responses,
                         const Camera& cam) {
    std::vector<Vec3> colors(scene.gaussians.size());
    for (size_t gi = 0; gi < scene.gaussians.size(); ++gi) {
        const Vec3 d = normalized(scene.gaussians[gi].mu - cam.position);
        colors[gi] = responses[gi].eval(d);
    }
    RenderOptions opt;
    opt.color_override = &colors;
    Image img = render(scene, cam, opt).rgb;
    for (double& v : img.px) v = quantize(v) / 255.0;
    return img;
}

Dataset generate_scene(int num_gaussians, TargetKind kind, uint64_t seed, int views, int size) {
    if (num_gaussians < 1) throw std::invalid_argument("generate_scene: num_gaussians < 1");
    Dataset ds;
    ds.kind = kind;
    ds.seed = seed;
    ds.num_gaussians = num_gaussians;
    ds.views = views;
    ds.size = size;

    Rng rng = substream(seed, /*tag=*/0x67656eull, 0);  // generator stream
    ds.scene.bounds_lo = {-1.0, -1.0, -1.0};
    ds.scene.bounds_hi = {1.0, 1.0, 1.0};
    for (int i = 0; i < num_gaussians; ++i) {
        ds.scene.gaussians.push_back(draw_gaussian(rng));
        ds.responses.push_back(random_target(kind, rng));
    }

    const double extent = length(Vec3{0.5, 0.5, 0.5});  // placement box half-diagonal
    const double radius = 4.0 * extent;
    const double elev = 30.0 * kPi / 180.0;
    for (int v = 0; v < views; ++v) {
        const double az = 2.0 * kPi * double(v) / double(views);
        const Vec3 eye{radius * std::cos(elev) * std::cos(az),
                       radius * std::cos(elev) * std::sin(az), radius * std::sin(elev)};
        ds.cameras.push_back(
            Camera::look_at(eye, {0, 0, 0}, {0, 0, 1}, 40.0 * kPi / 180.0, size, size));
    }

    for (const Camera& cam : ds.cameras)
        ds.targets.push_back(render_target_view(ds.scene, ds.responses, cam));
    return ds;
}

void save_cameras(const std::vector<Camera>& cams, const std::string& path) {
    std::ostringstream out(std::ios::binary);
    out.write("QGCM", 4);
    put_u32(out, 1);
    put_u64(out, cams.size());
    for (const Camera& c : cams) {
        for (int i = 0; i < 3; ++i) put_f64(out, c.position[i]);
        for (double v : c.world_to_cam.m) put_f64(out, v);
        put_f64(out, c.fx);
        put_f64(out, c.fy);
        put_f64(out, c.cx);
        put_f64(out, c.cy);
        put_u32(out, uint32_t(c.width));
        put_u32(out, uint32_t(c.height));
    }
    const std::string bytes = out.str();
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open for writing: " + tmp);
        f.write(bytes.data(), std::streamsize(bytes.size()));
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("rename failed: " + path);
}

std::vector<Camera> load_cameras(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "QGCM", 4) != 0)
        throw std::runtime_error("not a camera file: " + path);
    if (get_u32(in, "version") != 1) throw std::runtime_error("camera file version mismatch");
    const uint64_t n = get_u64(in, "camera count");
    if (n > (1ull << 20)) read_fail(in, "camera count (implausible)");
    std::vector<Camera> cams(n);
    for (Camera& c : cams) {
        for (int i = 0; i < 3; ++i) c.position[i] = get_f64(in, "position");
        for (double& v : c.world_to_cam.m) v = get_f64(in, "orientation");
        c.fx = get_f64(in, "fx");
        c.fy = get_f64(in, "fy");
        c.cx = get_f64(in, "cx");
        c.cy = get_f64(in, "cy");
        c.width = int(get_u32(in, "width"));
        c.height = int(get_u32(in, "height"));
    }
    return cams;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "targets");
    save_scene(ds.scene, (fs::path(dir) / "scene.qgs").string());
    save_cameras(ds.cameras, (fs::path(dir) / "cameras.qgcam").string());
    for (size_t i = 0; i < ds.targets.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "view_%03zu.ppm", i);
        write_ppm(ds.targets[i], (fs::path(dir) / "targets" / name).string());
    }
    Config cfg;
    cfg.set("kind", target_kind_name(ds.kind));
    cfg.set("seed", int64_t(ds.seed));
    cfg.set("gaussians", int64_t(ds.num_gaussians));
    cfg.set("views", int64_t(ds.views));
    cfg.set("size", int64_t(ds.size));
    cfg.save((fs::path(dir) / "dataset.cfg").string());
}

Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    const Config cfg = Config::load((fs::path(dir) / "dataset.cfg").string());
    Dataset ds;
    ds.kind = target_kind_from_name(cfg.get("kind"));
    ds.seed = uint64_t(cfg.get_int("seed"));
    ds.num_gaussians = int(cfg.get_int("gaussians"));
    ds.views = int(cfg.get_int("views"));
    ds.size = int(cfg.get_int("size"));
    ds.scene = load_scene((fs::path(dir) / "scene.qgs").string());
    ds.cameras = load_cameras((fs::path(dir) / "cameras.qgcam").string());
    for (int i = 0; i < ds.views; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "view_%03d.ppm", i);
        ds.targets.push_back(read_ppm((fs::path(dir) / "targets" / name).string()));
    }
    // replay the generator stream to recover the analytic responses
    Rng rng = substream(ds.seed, 0x67656eull, 0);
    for (int i = 0; i < ds.num_gaussians; ++i) {
        (void)draw_gaussian(rng);
        ds.responses.push_back(random_target(ds.kind, rng));
    }
    return ds;
}

}  // namespace qgs
