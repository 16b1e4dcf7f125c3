#include "qgs/kernels.hpp"

#include <cmath>

namespace qgs::kernels {

// The reductions keep four striped accumulators and combine them as
// (s0+s1)+(s2+s3) so the summation tree matches the AVX2 variant exactly.

namespace {

double reduce_abs_diff_scalar(const double* a, const double* b, size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += std::fabs(a[i] - b[i]);
        s1 += std::fabs(a[i + 1] - b[i + 1]);
        s2 += std::fabs(a[i + 2] - b[i + 2]);
        s3 += std::fabs(a[i + 3] - b[i + 3]);
    }
    double total = (s0 + s1) + (s2 + s3);
    for (; i < n; ++i) total += std::fabs(a[i] - b[i]);
    return total;
}

double reduce_sq_diff_scalar(const double* a, const double* b, size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const double d0 = a[i] - b[i];
        const double d1 = a[i + 1] - b[i + 1];
        const double d2 = a[i + 2] - b[i + 2];
        const double d3 = a[i + 3] - b[i + 3];
        s0 += d0 * d0;
        s1 += d1 * d1;
        s2 += d2 * d2;
        s3 += d3 * d3;
    }
    double total = (s0 + s1) + (s2 + s3);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        total += d * d;
    }
    return total;
}

void conv11_h_scalar(const double* src, double* dst, int w, int h, const double* taps) {
    const int r = 5;
    for (int y = 0; y < h; ++y) {
        const double* row = src + size_t(y) * w;
        double* out = dst + size_t(y) * w;
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = 0; k < 11; ++k) {
                const int xx = x + k - r;
                if (xx >= 0 && xx < w) acc += taps[k] * row[xx];
            }
            out[x] = acc;
        }
    }
}

void conv11_v_scalar(const double* src, double* dst, int w, int h, const double* taps) {
    const int r = 5;
    for (int y = 0; y < h; ++y) {
        double* out = dst + size_t(y) * w;
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = 0; k < 11; ++k) {
                const int yy = y + k - r;
                if (yy >= 0 && yy < h) acc += taps[k] * src[size_t(yy) * w + x];
            }
            out[x] = acc;
        }
    }
}

void splat_quad_row_scalar(double ca, double cb, double cc, double dx0, double dy,
                           double* q, int n) {
    const double cyy = cc * dy * dy;
    const double bxy = 2.0 * cb * dy;
    for (int i = 0; i < n; ++i) {
        const double dx = dx0 + double(i);
        q[i] = (ca * dx) * dx + bxy * dx + cyy;
    }
}

}  // namespace

const Kernels kScalar = {
    "scalar",
    reduce_abs_diff_scalar,
    reduce_sq_diff_scalar,
    conv11_h_scalar,
    conv11_v_scalar,
    splat_quad_row_scalar,
};

}  // namespace qgs::kernels
