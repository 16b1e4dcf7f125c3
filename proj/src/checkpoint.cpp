#include "qgs/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "qgs/binio.hpp"

namespace qgs {

namespace {

constexpr char kMagic[4] = {'Q', 'G', 'S', 'C'};
constexpr uint32_t kVersion = 1;

void put_scene(std::ostream& out, const Scene& s) {
    put_u64(out, s.gaussians.size());
    for (int i = 0; i < 3; ++i) put_f64(out, s.bounds_lo[i]);
    for (int i = 0; i < 3; ++i) put_f64(out, s.bounds_hi[i]);
    for (const Gaussian& g : s.gaussians) {
        for (int i = 0; i < 3; ++i) put_f64(out, g.mu[i]);
        put_f64(out, g.rot.w);
        put_f64(out, g.rot.x);
        put_f64(out, g.rot.y);
        put_f64(out, g.rot.z);
        for (int i = 0; i < 3; ++i) put_f64(out, g.log_scale[i]);
        put_f64(out, g.opacity_logit);
        for (double v : g.sh) put_f64(out, v);
    }
}

Scene get_scene(std::istream& in) {
    Scene s;
    const uint64_t n = get_u64(in, "gaussian count");
    if (n > (1ull << 32)) read_fail(in, "gaussian count (implausible)");
    for (int i = 0; i < 3; ++i) s.bounds_lo[i] = get_f64(in, "bounds");
    for (int i = 0; i < 3; ++i) s.bounds_hi[i] = get_f64(in, "bounds");
    s.gaussians.resize(n);
    for (Gaussian& g : s.gaussians) {
        for (int i = 0; i < 3; ++i) g.mu[i] = get_f64(in, "mu");
        g.rot.w = get_f64(in, "rot");
        g.rot.x = get_f64(in, "rot");
        g.rot.y = get_f64(in, "rot");
        g.rot.z = get_f64(in, "rot");
        for (int i = 0; i < 3; ++i) g.log_scale[i] = get_f64(in, "scale");
        g.opacity_logit = get_f64(in, "opacity");
        for (double& v : g.sh) v = get_f64(in, "sh");
    }
    return s;
}

void put_vec(std::ostream& out, const std::vector<double>& v) {
    put_u64(out, v.size());
    for (double x : v) put_f64(out, x);
}

std::vector<double> get_vec(std::istream& in, const char* what) {
    const uint64_t n = get_u64(in, what);
    if (n > (1ull << 32)) read_fail(in, what);
    std::vector<double> v(n);
    for (double& x : v) x = get_f64(in, what);
    return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ostringstream out(std::ios::binary);
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_str(out, ck.config_text);
    put_scene(out, ck.scene);
    put_u64(out, ck.tensors.size());
    for (const auto& [name, vals] : ck.tensors) {
        put_str(out, name);
        put_vec(out, vals);
    }
    put_u64(out, ck.adam.size());
    for (const auto& a : ck.adam) {
        put_str(out, a.name);
        put_vec(out, a.m);
        put_vec(out, a.v);
        put_u64(out, uint64_t(a.step));
    }
    put_u64(out, ck.seed);
    put_u64(out, uint64_t(ck.iter));

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

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    if (get_u32(in, "version") != kVersion)
        throw std::runtime_error("checkpoint version mismatch: " + path);
    Checkpoint ck;
    ck.config_text = get_str(in, "config");
    ck.scene = get_scene(in);
    const uint64_t nt = get_u64(in, "tensor count");
    if (nt > (1ull << 20)) read_fail(in, "tensor count (implausible)");
    for (uint64_t i = 0; i < nt; ++i) {
        std::string name = get_str(in, "tensor name");
        ck.tensors.emplace_back(std::move(name), get_vec(in, "tensor data"));
    }
    const uint64_t na = get_u64(in, "adam count");
    if (na > (1ull << 20)) read_fail(in, "adam count (implausible)");
    for (uint64_t i = 0; i < na; ++i) {
        Checkpoint::AdamSnap a;
        a.name = get_str(in, "adam name");
        a.m = get_vec(in, "adam m");
        a.v = get_vec(in, "adam v");
        a.step = int64_t(get_u64(in, "adam step"));
        ck.adam.push_back(std::move(a));
    }
    ck.seed = get_u64(in, "seed");
    ck.iter = int64_t(get_u64(in, "iter"));
    char extra;
    if (in.read(&extra, 1)) throw std::runtime_error("checkpoint has trailing bytes: " + path);
    return ck;
}

}  // namespace qgs
