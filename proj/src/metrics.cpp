#include "qgs/metrics.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "qgs/kernels.hpp"

namespace qgs {

namespace {

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void check_dims(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument("metrics: image dimension mismatch");
}

std::array<double, 11> gaussian_taps() {
    std::array<double, 11> t{};
    double sum = 0.0;
    for (int k = 0; k < 11; ++k) {
        const double d = double(k - 5);
        t[size_t(k)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        sum += t[size_t(k)];
    }
    for (double& v : t) v /= sum;
    return t;
}

using Plane = std::vector<double>;

Plane channel_plane(const Image& img, int ch) {
    Plane p(size_t(img.width) * img.height);
    for (size_t i = 0; i < p.size(); ++i) p[i] = img.px[3 * i + size_t(ch)];
    return p;
}

Plane blur(const Plane& src, int w, int h, const std::array<double, 11>& taps) {
    const auto& k = kernels::active();
    Plane tmp(src.size()), dst(src.size());
    k.conv11_h(src.data(), tmp.data(), w, h, taps.data());
    k.conv11_v(tmp.data(), dst.data(), w, h, taps.data());
    return dst;
}

struct SsimMaps {
    Plane mu_x, mu_y, v_x, v_y, v_xy;  // blurred x, y, x^2, y^2, x*y
    Plane x, y;
};

SsimMaps ssim_maps(const Image& a, const Image& b, int ch) {
    const auto taps = gaussian_taps();
    SsimMaps m;
    m.x = channel_plane(a, ch);
    m.y = channel_plane(b, ch);
    const int w = a.width, h = a.height;
    Plane xx(m.x.size()), yy(m.x.size()), xy(m.x.size());
    for (size_t i = 0; i < m.x.size(); ++i) {
        xx[i] = m.x[i] * m.x[i];
        yy[i] = m.y[i] * m.y[i];
        xy[i] = m.x[i] * m.y[i];
    }
    m.mu_x = blur(m.x, w, h, taps);
    m.mu_y = blur(m.y, w, h, taps);
    m.v_x = blur(xx, w, h, taps);
    m.v_y = blur(yy, w, h, taps);
    m.v_xy = blur(xy, w, h, taps);
    return m;
}

}  // namespace

double l1(const Image& a, const Image& b) {
    check_dims(a, b);
    return kernels::active().reduce_abs_diff(a.px.data(), b.px.data(), a.count()) /
           double(a.count());
}

double mse(const Image& a, const Image& b) {
    check_dims(a, b);
    return kernels::active().reduce_sq_diff(a.px.data(), b.px.data(), a.count()) /
           double(a.count());
}

double psnr(const Image& a, const Image& b) {
    const double m = mse(a, b);
    if (m <= 0.0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(1.0 / m));
}

double ssim(const Image& a, const Image& b) {
    check_dims(a, b);
    double total = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
        const SsimMaps m = ssim_maps(a, b, ch);
        for (size_t i = 0; i < m.x.size(); ++i) {
            const double mx = m.mu_x[i], my = m.mu_y[i];
            const double sx = m.v_x[i] - mx * mx;
            const double sy = m.v_y[i] - my * my;
            const double sxy = m.v_xy[i] - mx * my;
            const double a1 = 2.0 * mx * my + kC1;
            const double a2 = 2.0 * sxy + kC2;
            const double b1 = mx * mx + my * my + kC1;
            const double b2 = sx + sy + kC2;
            total += (a1 * a2) / (b1 * b2);
        }
    }
    return total / (3.0 * double(a.width) * double(a.height));
}

double loss(const Image& rendered, const Image& target, double lambda) {
    return (1.0 - lambda) * l1(rendered, target) + lambda * 0.5 * (1.0 - ssim(rendered, target));
}

Image loss_backward(const Image& rendered, const Image& target, double lambda) {
    check_dims(rendered, target);
    const int w = rendered.width, h = rendered.height;
    const size_t n = rendered.count();
    Image grad(w, h);

    // L1 term
    const double s1 = (1.0 - lambda) / double(n);
    for (size_t i = 0; i < n; ++i) {
        const double d = rendered.px[i] - target.px[i];
        grad.px[i] = d > 0.0 ? s1 : (d < 0.0 ? -s1 : 0.0);
    }

    if (lambda == 0.0) return grad;

    // D-SSIM term: dLoss/dS(p) = -lambda/2 * 1/(3wh)
    const auto taps = gaussian_taps();
    const double us = -lambda * 0.5 / (3.0 * double(w) * double(h));
    for (int ch = 0; ch < 3; ++ch) {
        const SsimMaps m = ssim_maps(rendered, target, ch);
        const size_t np = m.x.size();
        Plane d_mu(np), d_vx(np), d_vxy(np);
        for (size_t i = 0; i < np; ++i) {
            const double mx = m.mu_x[i], my = m.mu_y[i];
            const double sx = m.v_x[i] - mx * mx;
            const double sy = m.v_y[i] - my * my;
            const double sxy = m.v_xy[i] - mx * my;
            const double a1 = 2.0 * mx * my + kC1;
            const double a2 = 2.0 * sxy + kC2;
            const double b1 = mx * mx + my * my + kC1;
            const double b2 = sx + sy + kC2;
            const double D = b1 * b2;
            const double S = (a1 * a2) / D;
            const double dS_dA1 = a2 / D;
            const double dS_dA2 = a1 / D;
            const double dS_dB1 = -S / b1;
            const double dS_dB2 = -S / b2;
            // mu_x enters A1, B1 directly and sigma terms via -mu_x^2 / -mu_x mu_y
            d_mu[i] = us * (dS_dA1 * 2.0 * my + dS_dA2 * (-2.0 * my) + dS_dB1 * 2.0 * mx +
                            dS_dB2 * (-2.0 * mx));
            d_vx[i] = us * dS_dB2;
            d_vxy[i] = us * dS_dA2 * 2.0;
        }
        const Plane b_mu = blur(d_mu, w, h, taps);
        const Plane b_vx = blur(d_vx, w, h, taps);
        const Plane b_vxy = blur(d_vxy, w, h, taps);
        for (size_t i = 0; i < np; ++i) {
            grad.px[3 * i + size_t(ch)] +=
                b_mu[i] + b_vx[i] * 2.0 * m.x[i] + b_vxy[i] * m.y[i];
        }
    }
    return grad;
}

}  // namespace qgs
