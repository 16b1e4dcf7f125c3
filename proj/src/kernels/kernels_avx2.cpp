#include "qgs/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>

// Compiled with -mavx2 only (no -mfma, contraction off): every lane performs
// the same IEEE mul/add sequence as the scalar reference, so results are
// bit-identical.

namespace qgs::kernels {

namespace {

inline double hsum_striped(__m256d v) {
    alignas(32) double lane[4];
    _mm256_store_pd(lane, v);
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

inline __m256d abs_pd(__m256d v) {
    const __m256d sign = _mm256_set1_pd(-0.0);
    return _mm256_andnot_pd(sign, v);
}

double reduce_abs_diff_avx2(const double* a, const double* b, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_add_pd(acc, abs_pd(d));
    }
    double total = hsum_striped(acc);
    for (; i < n; ++i) total += std::fabs(a[i] - b[i]);
    return total;
}

double reduce_sq_diff_avx2(const double* a, const double* b, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    double total = hsum_striped(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        total += d * d;
    }
    return total;
}

// zero-padded scalar path for the row edges; same tap-order accumulation
inline double conv11_at(const double* row, int w, int x, const double* taps) {
    double acc = 0.0;
    for (int k = 0; k < 11; ++k) {
        const int xx = x + k - 5;
        if (xx >= 0 && xx < w) acc += taps[k] * row[xx];
    }
    return acc;
}

void conv11_h_avx2(const double* src, double* dst, int w, int h, const double* taps) {
    for (int y = 0; y < h; ++y) {
        const double* row = src + size_t(y) * w;
        double* out = dst + size_t(y) * w;
        const int lo = w < 5 ? w : 5;
        for (int x = 0; x < lo; ++x) out[x] = conv11_at(row, w, x, taps);
        int x = 5;
        for (; x + 4 <= w - 5; x += 4) {
            __m256d acc = _mm256_setzero_pd();
            for (int k = 0; k < 11; ++k) {
                acc = _mm256_add_pd(
                    acc, _mm256_mul_pd(_mm256_set1_pd(taps[k]), _mm256_loadu_pd(row + x - 5 + k)));
            }
            _mm256_storeu_pd(out + x, acc);
        }
        for (; x < w; ++x) out[x] = conv11_at(row, w, x, taps);
    }
}

void conv11_v_avx2(const double* src, double* dst, int w, int h, const double* taps) {
    for (int y = 0; y < h; ++y) {
        double* out = dst + size_t(y) * w;
        int x = 0;
        for (; x + 4 <= w; x += 4) {
            __m256d acc = _mm256_setzero_pd();
            for (int k = 0; k < 11; ++k) {
                const int yy = y + k - 5;
                if (yy < 0 || yy >= h) continue;
                acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_set1_pd(taps[k]),
                                                       _mm256_loadu_pd(src + size_t(yy) * w + x)));
            }
            _mm256_storeu_pd(out + x, acc);
        }
        for (; x < w; ++x) {
            double acc = 0.0;
            for (int k = 0; k < 11; ++k) {
                const int yy = y + k - 5;
                if (yy >= 0 && yy < h) acc += taps[k] * src[size_t(yy) * w + x];
            }
            out[x] = acc;
        }
    }
}

void splat_quad_row_avx2(double ca, double cb, double cc, double dx0, double dy,
                         double* q, int n) {
    const double cyy = cc * dy * dy;
    const double bxy = 2.0 * cb * dy;
    const __m256d vca = _mm256_set1_pd(ca);
    const __m256d vbxy = _mm256_set1_pd(bxy);
    const __m256d vcyy = _mm256_set1_pd(cyy);
    const __m256d vdx0 = _mm256_set1_pd(dx0);
    const __m256d ramp = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d dx = _mm256_add_pd(vdx0, _mm256_add_pd(_mm256_set1_pd(double(i)), ramp));
        const __m256d t1 = _mm256_mul_pd(_mm256_mul_pd(vca, dx), dx);
        const __m256d t2 = _mm256_mul_pd(vbxy, dx);
        _mm256_storeu_pd(q + i, _mm256_add_pd(_mm256_add_pd(t1, t2), vcyy));
    }
    for (; i < n; ++i) {
        const double dx = dx0 + double(i);
        q[i] = (ca * dx) * dx + bxy * dx + cyy;
    }
}

}  // namespace

const Kernels kAvx2 = {
    "avx2",
    reduce_abs_diff_avx2,
    reduce_sq_diff_avx2,
    conv11_h_avx2,
    conv11_v_avx2,
    splat_quad_row_avx2,
};

}  // namespace qgs::kernels

#endif  // x86_64
