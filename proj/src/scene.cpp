#include "qgs/scene.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "qgs/binio.hpp"

namespace qgs {

int modulation_n_out(ModulationMode m) {
    switch (m) {
        case ModulationMode::Full: return 49;
        case ModulationMode::OnlyOpacity: return 1;
        case ModulationMode::OnlySh: return 48;
        case ModulationMode::NoSh: return 4;
    }
    return 0;
}

int modulation_sh_degree(ModulationMode m) {
    return m == ModulationMode::NoSh ? 0 : 3;
}

std::string modulation_name(ModulationMode m) {
    switch (m) {
        case ModulationMode::Full: return "full";
        case ModulationMode::OnlyOpacity: return "only_opacity";
        case ModulationMode::OnlySh: return "only_sh";
        case ModulationMode::NoSh: return "no_sh";
    }
    return "?";
}

ModulationMode modulation_from_name(const std::string& s) {
    if (s == "full") return ModulationMode::Full;
    if (s == "only_opacity") return ModulationMode::OnlyOpacity;
    if (s == "only_sh") return ModulationMode::OnlySh;
    if (s == "no_sh") return ModulationMode::NoSh;
    throw std::invalid_argument("unknown modulation mode: " + s);
}

namespace {

constexpr char kMagic[4] = {'Q', 'G', 'S', '1'};
constexpr uint32_t kVersion = 1;

void check_finite(double v, const char* what, size_t idx) {
    if (!std::isfinite(v))
        throw std::runtime_error(std::string("scene file: non-finite ") + what + " in record " +
                                 std::to_string(idx));
}

}  // namespace

void save_scene(const Scene& scene, const std::string& path) {
    std::ostringstream out(std::ios::binary);
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u64(out, scene.gaussians.size());
    for (int i = 0; i < 3; ++i) put_f64(out, scene.bounds_lo[i]);
    for (int i = 0; i < 3; ++i) put_f64(out, scene.bounds_hi[i]);
    for (const Gaussian& g : scene.gaussians) {
        for (int i = 0; i < 3; ++i) put_f64(out, g.mu[i]);
        put_f64(out, g.rot.w);
        put_f64(out, g.rot.x);
        put_f64(out, g.rot.y);
        put_f64(out, g.rot.z);
        for (int i = 0; i < 3; ++i) put_f64(out, g.log_scale[i]);
        put_f64(out, g.opacity_logit);
        for (double v : g.sh) put_f64(out, v);
    }
    const std::string bytes = out.str();
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open for writing: " + tmp);
        f.write(bytes.data(), std::streamsize(bytes.size()));
        if (!f) throw std::runtime_error("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("rename failed: " + path);
}

Scene load_scene(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a scene file: " + path);
    const uint32_t ver = get_u32(in, "version");
    if (ver != kVersion)
        throw std::runtime_error("scene version mismatch (got " + std::to_string(ver) + ")");
    const uint64_t count = get_u64(in, "gaussian count");
    if (count > (1ull << 32)) read_fail(in, "gaussian count (implausible length)");
    Scene scene;
    for (int i = 0; i < 3; ++i) scene.bounds_lo[i] = get_f64(in, "bounds");
    for (int i = 0; i < 3; ++i) scene.bounds_hi[i] = get_f64(in, "bounds");
    scene.gaussians.resize(count);
    for (size_t gi = 0; gi < count; ++gi) {
        Gaussian& g = scene.gaussians[gi];
        for (int i = 0; i < 3; ++i) g.mu[i] = get_f64(in, "mu");
        g.rot.w = get_f64(in, "rot");
        g.rot.x = get_f64(in, "rot");
        g.rot.y = get_f64(in, "rot");
        g.rot.z = get_f64(in, "rot");
        for (int i = 0; i < 3; ++i) g.log_scale[i] = get_f64(in, "scale");
        g.opacity_logit = get_f64(in, "opacity");
        for (double& v : g.sh) v = get_f64(in, "sh");
        for (int i = 0; i < 3; ++i) check_finite(g.mu[i], "mu", gi);
        check_finite(g.opacity_logit, "opacity_logit", gi);
        for (double v : g.sh) check_finite(v, "sh", gi);
    }
    // trailing garbage means a corrupt length field
    char extra;
    if (in.read(&extra, 1)) throw std::runtime_error("scene file has trailing bytes: " + path);
    return scene;
}

}  // namespace qgs
