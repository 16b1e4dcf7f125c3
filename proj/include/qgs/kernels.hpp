#pragma once

#include <cstddef>
#include <string>

namespace qgs::kernels {

// Data-parallel inner loops used by the rasterizer and the image metrics.
// Each kernel has a scalar reference implementation and an AVX2 variant; the
// active set is selected once at runtime (CPU probe, overridable via the
// QGS_KERNELS environment variable or set_active()).
//
// Contract: variants are bit-identical to the scalar reference. Both sides
// use the same per-element operation order and the same 4-lane striped
// reduction order, and neither uses fused multiply-add.

struct Kernels {
    const char* name;

    // sum over i of |a[i] - b[i]|
    double (*reduce_abs_diff)(const double* a, const double* b, size_t n);
    // sum over i of (a[i] - b[i])^2
    double (*reduce_sq_diff)(const double* a, const double* b, size_t n);

    // 11-tap correlation along x with zero padding outside [0, w).
    // src/dst are w*h scalars, row-major; taps has 11 entries.
    void (*conv11_h)(const double* src, double* dst, int w, int h, const double* taps);
    // same along y
    void (*conv11_v)(const double* src, double* dst, int w, int h, const double* taps);

    // Mahalanobis-style quadratic form of one splat along a pixel row:
    // q[i] = ca*(dx0+i)^2 + 2*cb*(dx0+i)*dy + cc*dy^2
    void (*splat_quad_row)(double ca, double cb, double cc, double dx0, double dy,
                           double* q, int n);
};

extern const Kernels kScalar;
#if defined(__x86_64__) || defined(_M_X64)
extern const Kernels kAvx2;
#endif

// Active kernel set. First call probes the CPU and QGS_KERNELS.
const Kernels& active();

// Force a set by name ("scalar", "avx2"). Returns false if unavailable.
bool set_active(const std::string& name);

bool avx2_supported();

}  // namespace qgs::kernels
