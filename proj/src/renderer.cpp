#include "qgs/renderer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <thread>

#include "qgs/kernels.hpp"
#include "qgs/sh.hpp"

namespace qgs {

namespace {

constexpr double kNearPlane = 0.01;
constexpr double kMinDet = 1e-12;
constexpr double kAlphaSkip = 1.0 / 255.0;
constexpr double kTransmitStop = 1e-4;
constexpr double kAlphaCeil = 0.9999;
constexpr double kCovFloor = 0.3;
constexpr double kRadiusSigma = 3.5;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Geom {
    Vec2 mean;
    double cov_a, cov_b, cov_c;  // 2D covariance after the isotropic floor
    double depth;
    Vec3 t;  // camera-space position
};

// projection geometry shared by forward, backward and project_gaussian()
bool project_geom(const Gaussian& g, const Camera& cam, Geom* out) {
    const Vec3 t = cam.world_to_cam * (g.mu - cam.position);
    if (t.z <= kNearPlane) return false;
    out->t = t;
    out->depth = t.z;
    out->mean.x = cam.fx * t.x / t.z + cam.cx;
    out->mean.y = cam.fy * t.y / t.z + cam.cy;

    const Mat3 R = quat_to_mat(g.rot);
    const Vec3 sc{std::exp(g.log_scale.x), std::exp(g.log_scale.y), std::exp(g.log_scale.z)};
    Mat3 RS = R;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) RS(r, c) *= (&sc.x)[c];
    const Mat3 vs = cam.world_to_cam * (RS * transposed(RS)) * transposed(cam.world_to_cam);

    const double jx = cam.fx / t.z, jy = cam.fy / t.z;
    const double jxz = -cam.fx * t.x / (t.z * t.z), jyz = -cam.fy * t.y / (t.z * t.z);
    // J rows: (jx, 0, jxz), (0, jy, jyz)
    out->cov_a = jx * (jx * vs(0, 0) + jxz * vs(2, 0)) + jxz * (jx * vs(0, 2) + jxz * vs(2, 2)) +
                 kCovFloor;
    out->cov_b = jy * (jx * vs(0, 1) + jxz * vs(2, 1)) + jyz * (jx * vs(0, 2) + jxz * vs(2, 2));
    out->cov_c = jy * (jy * vs(1, 1) + jyz * vs(2, 1)) + jyz * (jy * vs(1, 2) + jyz * vs(2, 2)) +
                 kCovFloor;
    return true;
}

struct Splat {
    int index = -1;  // into scene.gaussians
    Geom geom;
    double conic_a = 0.0, conic_b = 0.0, conic_c = 0.0;
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive pixel bounds
    Vec3 color;                // composited color (post all clamps)
    Vec3 color_base;           // NoSh: clamp01(degree-0 eval) before rgb factors
    double alpha = 0.0;        // composited alpha (post ceiling)
    double alpha_pre = 0.0;    // sigmoid(logit) * alpha_factor, before ceiling
    double sigma = 0.0;        // sigmoid(logit)
    Vec3 dir;                  // normalize(mu - cam.position)
    double dist = 0.0;
    std::array<double, 48> sh_mod{};
};

struct Frame {
    std::vector<Splat> splats;  // depth order, index tie-break
};

int required_factors(const RenderOptions& opt) {
    return opt.mode ? modulation_n_out(*opt.mode) : 0;
}

Frame prepare(const Scene& scene, const Camera& cam, const RenderOptions& opt,
              const ModulationFactors* factors) {
    if (opt.mode && (factors == nullptr || factors->size() != scene.gaussians.size()))
        throw std::invalid_argument("render: modulation factors missing");
    Frame fr;
    const int sh_degree = opt.mode ? modulation_sh_degree(*opt.mode) : 3;
    for (size_t gi = 0; gi < scene.gaussians.size(); ++gi) {
        const Gaussian& g = scene.gaussians[gi];
        if (opt.mode && int((*factors)[gi].size()) != required_factors(opt))
            throw std::invalid_argument("render: factor length mismatch");

        Splat s;
        if (!project_geom(g, cam, &s.geom)) continue;
        s.index = int(gi);
        const Vec3 rel = g.mu - cam.position;
        s.dist = length(rel);
        s.dir = rel / s.dist;

        const double det = s.geom.cov_a * s.geom.cov_c - s.geom.cov_b * s.geom.cov_b;
        if (det < kMinDet) continue;
        s.conic_a = s.geom.cov_c / det;
        s.conic_b = -s.geom.cov_b / det;
        s.conic_c = s.geom.cov_a / det;

        const double mid = 0.5 * (s.geom.cov_a + s.geom.cov_c);
        const double disc = std::sqrt(std::max(0.0, mid * mid - det));
        const double radius = kRadiusSigma * std::sqrt(std::max(1e-12, mid + disc));
        s.x0 = std::max(0, int(std::floor(s.geom.mean.x - radius)));
        s.x1 = std::min(cam.width - 1, int(std::ceil(s.geom.mean.x + radius)));
        s.y0 = std::max(0, int(std::floor(s.geom.mean.y - radius)));
        s.y1 = std::min(cam.height - 1, int(std::ceil(s.geom.mean.y + radius)));
        if (s.x0 > s.x1 || s.y0 > s.y1) continue;

        const double* f = opt.mode ? (*factors)[gi].data() : nullptr;
        s.sigma = sigmoid(g.opacity_logit);
        double alpha_factor = 1.0;
        s.sh_mod = g.sh;
        if (opt.mode) {
            switch (*opt.mode) {
                case ModulationMode::Full:
                    for (int k = 0; k < 48; ++k) s.sh_mod[size_t(k)] = g.sh[size_t(k)] * f[k];
                    alpha_factor = f[48];
                    break;
                case ModulationMode::OnlySh:
                    for (int k = 0; k < 48; ++k) s.sh_mod[size_t(k)] = g.sh[size_t(k)] * f[k];
                    break;
                case ModulationMode::OnlyOpacity:
                    alpha_factor = f[0];
                    break;
                case ModulationMode::NoSh:
                    alpha_factor = f[3];
                    break;
            }
        }
        s.alpha_pre = s.sigma * alpha_factor;
        s.alpha = std::min(s.alpha_pre, kAlphaCeil);

        if (opt.color_override != nullptr) {
            const Vec3 c = (*opt.color_override)[gi];
            s.color = Vec3{clamp01(c.x), clamp01(c.y), clamp01(c.z)};
        } else if (opt.mode && *opt.mode == ModulationMode::NoSh) {
            s.color_base = eval_sh(g.sh, s.dir, 0);
            s.color = Vec3{clamp01(s.color_base.x * f[0]), clamp01(s.color_base.y * f[1]),
                           clamp01(s.color_base.z * f[2])};
        } else {
            s.color = eval_sh(s.sh_mod, s.dir, sh_degree);
        }
        fr.splats.push_back(s);
    }
    std::stable_sort(fr.splats.begin(), fr.splats.end(), [](const Splat& a, const Splat& b) {
        if (a.geom.depth != b.geom.depth) return a.geom.depth < b.geom.depth;
        return a.index < b.index;
    });
    return fr;
}

struct RowScratch {
    std::vector<double> q;  // splats * width
    int width = 0;
    void reset(size_t nsplats, int w) {
        width = w;
        q.assign(nsplats * size_t(w), 0.0);
    }
};

void fill_row(const Frame& fr, int y, RowScratch& scratch) {
    const auto& k = kernels::active();
    for (size_t si = 0; si < fr.splats.size(); ++si) {
        const Splat& s = fr.splats[si];
        if (y < s.y0 || y > s.y1) continue;
        const double dy = (double(y) + 0.5) - s.geom.mean.y;
        const double dx0 = (double(s.x0) + 0.5) - s.geom.mean.x;
        k.splat_quad_row(s.conic_a, s.conic_b, s.conic_c, dx0, dy,
                         scratch.q.data() + si * size_t(scratch.width) + s.x0, s.x1 - s.x0 + 1);
    }
}

template <typename PerContribution>
void composite_pixel(const Frame& fr, const RowScratch& scratch, int x, int y, Vec3 bg,
                     Vec3* out_rgb, double* out_T, PerContribution&& contrib) {
    double T = 1.0;
    Vec3 C{};
    for (size_t si = 0; si < fr.splats.size(); ++si) {
        const Splat& s = fr.splats[si];
        if (x < s.x0 || x > s.x1 || y < s.y0 || y > s.y1) continue;
        const double q = scratch.q[si * size_t(scratch.width) + size_t(x)];
        const double w = std::exp(-0.5 * q);
        const double a = s.alpha * w;
        if (a < kAlphaSkip) continue;
        contrib(si, w, a, T);
        C += s.color * (a * T);
        T *= 1.0 - a;
        if (T < kTransmitStop) break;
    }
    *out_rgb = C + bg * T;
    *out_T = T;
}

void parallel_rows(int height, int threads, const std::function<void(int)>& row_fn) {
    if (threads <= 1) {
        for (int y = 0; y < height; ++y) row_fn(y);
        return;
    }
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int y = next.fetch_add(1);
            if (y >= height) return;
            row_fn(y);
        }
    };
    std::vector<std::thread> pool;
    const int n = std::min(threads, height);
    pool.reserve(size_t(n));
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

}  // namespace

std::optional<Projected> project_gaussian(const Gaussian& g, const Camera& cam) {
    Geom geom;
    if (!project_geom(g, cam, &geom)) return std::nullopt;
    return Projected{geom.mean, geom.cov_a, geom.cov_b, geom.cov_c, geom.depth};
}

RenderResult render(const Scene& scene, const Camera& cam, const RenderOptions& opt,
                    const ModulationFactors* factors) {
    const Frame fr = prepare(scene, cam, opt, factors);
    RenderResult out;
    out.rgb = Image(cam.width, cam.height);
    out.transmittance.assign(size_t(cam.width) * cam.height, 1.0);

    parallel_rows(cam.height, opt.threads, [&](int y) {
        RowScratch scratch;
        scratch.reset(fr.splats.size(), cam.width);
        fill_row(fr, y, scratch);
        for (int x = 0; x < cam.width; ++x) {
            Vec3 rgb;
            double T;
            composite_pixel(fr, scratch, x, y, opt.background, &rgb, &T,
                            [](size_t, double, double, double) {});
            double* px = out.rgb.at(x, y);
            px[0] = rgb.x;
            px[1] = rgb.y;
            px[2] = rgb.z;
            out.transmittance[size_t(y) * cam.width + x] = T;
        }
    });
    return out;
}

namespace {

struct SplatPixelGrads {
    Vec3 d_color{};
    double d_alpha = 0.0;
    double d_mean_x = 0.0, d_mean_y = 0.0;
    double d_conic_a = 0.0, d_conic_b = 0.0, d_conic_c = 0.0;
};

struct Contribution {
    size_t si;
    double w, a, T;
};

}  // namespace

std::vector<GaussianGrads> render_backward(const Scene& scene, const Camera& cam,
                                           const RenderOptions& opt,
                                           const ModulationFactors* factors,
                                           const Image& d_image) {
    if (opt.color_override != nullptr)
        throw std::invalid_argument("render_backward: color_override is forward-only");
    const Frame fr = prepare(scene, cam, opt, factors);
    const size_t ns = fr.splats.size();
    const int n_fac = required_factors(opt);

    // one accumulator block per pixel row, merged in row order afterwards so
    // the result is invariant to the thread count
    std::vector<std::vector<SplatPixelGrads>> rows(size_t(cam.height));

    parallel_rows(cam.height, opt.threads, [&](int y) {
        RowScratch scratch;
        scratch.reset(ns, cam.width);
        fill_row(fr, y, scratch);
        auto& acc = rows[size_t(y)];
        acc.assign(ns, SplatPixelGrads{});
        std::vector<Contribution> hits;
        for (int x = 0; x < cam.width; ++x) {
            hits.clear();
            Vec3 rgb;
            double T_final;
            composite_pixel(fr, scratch, x, y, opt.background, &rgb, &T_final,
                            [&](size_t si, double w, double a, double T) {
                                hits.push_back({si, w, a, T});
                            });
            const double* gp = d_image.at(x, y);
            const Vec3 g{gp[0], gp[1], gp[2]};
            if (g.x == 0.0 && g.y == 0.0 && g.z == 0.0) continue;

            // reverse sweep; S = color composited after splat i (incl. background)
            Vec3 S = opt.background * T_final;
            for (size_t hi = hits.size(); hi-- > 0;) {
                const Contribution& h = hits[hi];
                const Splat& s = fr.splats[h.si];
                SplatPixelGrads& a_out = acc[h.si];
                const double aT = h.a * h.T;
                a_out.d_color += g * aT;
                const double one_minus = 1.0 - h.a;
                const double d_a = g.x * (s.color.x * h.T - S.x / one_minus) +
                                   g.y * (s.color.y * h.T - S.y / one_minus) +
                                   g.z * (s.color.z * h.T - S.z / one_minus);
                a_out.d_alpha += h.w * d_a;
                const double d_w = s.alpha * d_a;
                const double d_q = -0.5 * h.w * d_w;
                const double dx = (double(x) + 0.5) - s.geom.mean.x;
                const double dy = (double(y) + 0.5) - s.geom.mean.y;
                a_out.d_conic_a += dx * dx * d_q;
                a_out.d_conic_b += 2.0 * dx * dy * d_q;
                a_out.d_conic_c += dy * dy * d_q;
                a_out.d_mean_x -= (2.0 * s.conic_a * dx + 2.0 * s.conic_b * dy) * d_q;
                a_out.d_mean_y -= (2.0 * s.conic_b * dx + 2.0 * s.conic_c * dy) * d_q;
                S += s.color * aT;
            }
        }
    });

    std::vector<SplatPixelGrads> total(ns);
    for (int y = 0; y < cam.height; ++y)
        for (size_t si = 0; si < ns; ++si) {
            const SplatPixelGrads& r = rows[size_t(y)][si];
            SplatPixelGrads& t = total[si];
            t.d_color += r.d_color;
            t.d_alpha += r.d_alpha;
            t.d_mean_x += r.d_mean_x;
            t.d_mean_y += r.d_mean_y;
            t.d_conic_a += r.d_conic_a;
            t.d_conic_b += r.d_conic_b;
            t.d_conic_c += r.d_conic_c;
        }

    std::vector<GaussianGrads> out(scene.gaussians.size());
    if (opt.mode)
        for (auto& gg : out) gg.d_factors.assign(size_t(n_fac), 0.0);

    const int sh_degree = opt.mode ? modulation_sh_degree(*opt.mode) : 3;
    for (size_t si = 0; si < ns; ++si) {
        const Splat& s = fr.splats[si];
        const SplatPixelGrads& tg = total[si];
        const Gaussian& g = scene.gaussians[size_t(s.index)];
        GaussianGrads& gg = out[size_t(s.index)];
        const double* f = opt.mode ? (*factors)[size_t(s.index)].data() : nullptr;
        double* df = opt.mode ? gg.d_factors.data() : nullptr;

        // opacity chain: alpha = min(sigma * factor, ceiling)
        if (s.alpha_pre < kAlphaCeil) {
            double alpha_factor = 1.0;
            int af_slot = -1;
            if (opt.mode) {
                if (*opt.mode == ModulationMode::Full) { alpha_factor = f[48]; af_slot = 48; }
                else if (*opt.mode == ModulationMode::OnlyOpacity) { alpha_factor = f[0]; af_slot = 0; }
                else if (*opt.mode == ModulationMode::NoSh) { alpha_factor = f[3]; af_slot = 3; }
            }
            gg.d_opacity_logit += s.sigma * (1.0 - s.sigma) * alpha_factor * tg.d_alpha;
            if (af_slot >= 0) df[af_slot] += s.sigma * tg.d_alpha;
        }

        // color chain
        Vec3 dd{};
        if (opt.mode && *opt.mode == ModulationMode::NoSh) {
            Vec3 d_base{};
            for (int ch = 0; ch < 3; ++ch) {
                const double pre = s.color_base[ch] * f[ch];
                if (pre <= 0.0 || pre >= 1.0) continue;
                d_base[ch] = f[ch] * tg.d_color[ch];
                df[ch] += s.color_base[ch] * tg.d_color[ch];
            }
            dd = eval_sh_backward(g.sh, s.dir, d_base, gg.d_sh, 0);
        } else {
            std::array<double, 48> d_sh_mod{};
            dd = eval_sh_backward(s.sh_mod, s.dir, tg.d_color, d_sh_mod, sh_degree);
            const bool factored =
                opt.mode && (*opt.mode == ModulationMode::Full || *opt.mode == ModulationMode::OnlySh);
            for (int k = 0; k < 48; ++k) {
                if (factored) {
                    gg.d_sh[size_t(k)] += d_sh_mod[size_t(k)] * f[k];
                    df[k] += d_sh_mod[size_t(k)] * g.sh[size_t(k)];
                } else {
                    gg.d_sh[size_t(k)] += d_sh_mod[size_t(k)];
                }
            }
        }

        // conic -> 2D covariance: dCov = -Conic * Gc * Conic (all symmetric)
        const double ia = s.conic_a, ib = s.conic_b, ic = s.conic_c;
        const double ma = tg.d_conic_a, mb = 0.5 * tg.d_conic_b, mc = tg.d_conic_c;
        const double p00 = ia * ma + ib * mb, p01 = ia * mb + ib * mc;
        const double p10 = ib * ma + ic * mb, p11 = ib * mb + ic * mc;
        const double v00 = -(p00 * ia + p01 * ib);
        const double v01 = -(p00 * ib + p01 * ic);
        const double v11 = -(p10 * ib + p11 * ic);
        const double d_cov_a = v00;
        const double d_cov_b = 2.0 * v01;
        const double d_cov_c = v11;

        const Vec3 tc = s.geom.t;
        const double jx = cam.fx / tc.z, jy = cam.fy / tc.z;
        const double jxz = -cam.fx * tc.x / (tc.z * tc.z), jyz = -cam.fy * tc.y / (tc.z * tc.z);
        const Mat3 W = cam.world_to_cam;
        const Mat3 Rm = quat_to_mat(g.rot);
        const Vec3 sc{std::exp(g.log_scale.x), std::exp(g.log_scale.y), std::exp(g.log_scale.z)};
        Mat3 RS = Rm;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) RS(r, c) *= (&sc.x)[c];
        const Mat3 vs = W * (RS * transposed(RS)) * transposed(W);

        const double ca = d_cov_a, cb = 0.5 * d_cov_b, cc = d_cov_c;
        const double J[2][3] = {{jx, 0.0, jxz}, {0.0, jy, jyz}};
        const double G2[2][2] = {{ca, cb}, {cb, cc}};
        Mat3 dVs;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double acc = 0.0;
                for (int r = 0; r < 2; ++r)
                    for (int c = 0; c < 2; ++c) acc += J[r][i] * G2[r][c] * J[c][j];
                dVs(i, j) = acc;
            }
        double dJ[2][3];
        for (int r = 0; r < 2; ++r)
            for (int i = 0; i < 3; ++i) {
                double acc = 0.0;
                for (int c = 0; c < 2; ++c)
                    for (int k2 = 0; k2 < 3; ++k2) acc += 2.0 * G2[r][c] * J[c][k2] * vs(k2, i);
                dJ[r][i] = acc;
            }

        Vec3 dt{};
        dt.x += dJ[0][2] * (-cam.fx / (tc.z * tc.z));
        dt.y += dJ[1][2] * (-cam.fy / (tc.z * tc.z));
        dt.z += dJ[0][0] * (-cam.fx / (tc.z * tc.z)) + dJ[1][1] * (-cam.fy / (tc.z * tc.z)) +
                dJ[0][2] * (2.0 * cam.fx * tc.x / (tc.z * tc.z * tc.z)) +
                dJ[1][2] * (2.0 * cam.fy * tc.y / (tc.z * tc.z * tc.z));

        dt.x += tg.d_mean_x * jx;
        dt.y += tg.d_mean_y * jy;
        dt.z += tg.d_mean_x * (-cam.fx * tc.x / (tc.z * tc.z)) +
                tg.d_mean_y * (-cam.fy * tc.y / (tc.z * tc.z));

        const Mat3 dSigma3 = transposed(W) * dVs * W;

        Mat3 dRS;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int k2 = 0; k2 < 3; ++k2) acc += 2.0 * dSigma3(r, k2) * RS(k2, c);
                dRS(r, c) = acc;
            }
        Mat3 dR;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) dR(r, c) = dRS(r, c) * (&sc.x)[c];
        for (int c = 0; c < 3; ++c) {
            double dsc = 0.0;
            for (int r = 0; r < 3; ++r) dsc += dRS(r, c) * Rm(r, c);
            gg.d_log_scale[c] += dsc * (&sc.x)[c];
        }

        {
            const double n = quat_norm(g.rot);
            const double w = g.rot.w / n, x = g.rot.x / n, y = g.rot.y / n, z = g.rot.z / n;
            double dq[4] = {0, 0, 0, 0};
            auto accum = [&](int r, int c, double dw, double dx_, double dy_, double dz_) {
                const double gr = dR(r, c);
                dq[0] += gr * dw;
                dq[1] += gr * dx_;
                dq[2] += gr * dy_;
                dq[3] += gr * dz_;
            };
            accum(0, 0, 0.0, 0.0, -4 * y, -4 * z);
            accum(0, 1, -2 * z, 2 * y, 2 * x, -2 * w);
            accum(0, 2, 2 * y, 2 * z, 2 * w, 2 * x);
            accum(1, 0, 2 * z, 2 * y, 2 * x, 2 * w);
            accum(1, 1, 0.0, -4 * x, 0.0, -4 * z);
            accum(1, 2, -2 * x, -2 * w, 2 * z, 2 * y);
            accum(2, 0, -2 * y, 2 * z, -2 * w, 2 * x);
            accum(2, 1, 2 * x, 2 * w, 2 * z, 2 * y);
            accum(2, 2, 0.0, -4 * x, -4 * y, 0.0);
            const double qh[4] = {w, x, y, z};
            double dotqq = 0.0;
            for (int i = 0; i < 4; ++i) dotqq += qh[i] * dq[i];
            for (int i = 0; i < 4; ++i) gg.d_rot[size_t(i)] += (dq[i] - qh[i] * dotqq) / n;
        }

        gg.d_mu += transposed(W) * dt;
        gg.d_mu += (dd - s.dir * dot(s.dir, dd)) / s.dist;
    }
    return out;
}

}  // namespace qgs
