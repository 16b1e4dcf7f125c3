#include "qgs/sh.hpp"

namespace qgs {

namespace {

constexpr double kC0 = 0.28209479177387814;   // 1/(2 sqrt(pi))
constexpr double kC1 = 0.4886025119029199;    // sqrt(3/(4 pi))
constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                           -1.0925484305920792, 0.5462742152960396};
constexpr double kC3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                           0.3731763325901154, -0.4570457994644658, 1.445305721320277,
                           -0.5900435899266435};

}  // namespace

std::array<double, kShCoeffsPerChannel> sh_basis(Vec3 d, int degree) {
    const double x = d.x, y = d.y, z = d.z;
    std::array<double, kShCoeffsPerChannel> b{};
    b[0] = kC0;
    if (degree < 1) return b;
    b[1] = -kC1 * y;
    b[2] = kC1 * z;
    b[3] = -kC1 * x;
    if (degree < 2) return b;
    const double xx = x * x, yy = y * y, zz = z * z;
    b[4] = kC2[0] * x * y;
    b[5] = kC2[1] * y * z;
    b[6] = kC2[2] * (2.0 * zz - xx - yy);
    b[7] = kC2[3] * x * z;
    b[8] = kC2[4] * (xx - yy);
    if (degree < 3) return b;
    b[9] = kC3[0] * y * (3.0 * xx - yy);
    b[10] = kC3[1] * x * y * z;
    b[11] = kC3[2] * y * (4.0 * zz - xx - yy);
    b[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    b[13] = kC3[4] * x * (4.0 * zz - xx - yy);
    b[14] = kC3[5] * z * (xx - yy);
    b[15] = kC3[6] * x * (xx - 3.0 * yy);
    return b;
}

ShBasisGrad sh_basis_grad(Vec3 d, int degree) {
    const double x = d.x, y = d.y, z = d.z;
    ShBasisGrad g;
    if (degree < 1) return g;
    g.dy[1] = -kC1;
    g.dz[2] = kC1;
    g.dx[3] = -kC1;
    if (degree < 2) return g;
    g.dx[4] = kC2[0] * y;
    g.dy[4] = kC2[0] * x;
    g.dy[5] = kC2[1] * z;
    g.dz[5] = kC2[1] * y;
    g.dx[6] = kC2[2] * -2.0 * x;
    g.dy[6] = kC2[2] * -2.0 * y;
    g.dz[6] = kC2[2] * 4.0 * z;
    g.dx[7] = kC2[3] * z;
    g.dz[7] = kC2[3] * x;
    g.dx[8] = kC2[4] * 2.0 * x;
    g.dy[8] = kC2[4] * -2.0 * y;
    if (degree < 3) return g;
    g.dx[9] = kC3[0] * 6.0 * x * y;
    g.dy[9] = kC3[0] * (3.0 * x * x - 3.0 * y * y);
    g.dx[10] = kC3[1] * y * z;
    g.dy[10] = kC3[1] * x * z;
    g.dz[10] = kC3[1] * x * y;
    g.dx[11] = kC3[2] * -2.0 * x * y;
    g.dy[11] = kC3[2] * (4.0 * z * z - x * x - 3.0 * y * y);
    g.dz[11] = kC3[2] * 8.0 * y * z;
    g.dx[12] = kC3[3] * -6.0 * x * z;
    g.dy[12] = kC3[3] * -6.0 * y * z;
    g.dz[12] = kC3[3] * (6.0 * z * z - 3.0 * x * x - 3.0 * y * y);
    g.dx[13] = kC3[4] * (4.0 * z * z - 3.0 * x * x - y * y);
    g.dy[13] = kC3[4] * -2.0 * x * y;
    g.dz[13] = kC3[4] * 8.0 * x * z;
    g.dx[14] = kC3[5] * 2.0 * x * z;
    g.dy[14] = kC3[5] * -2.0 * y * z;
    g.dz[14] = kC3[5] * (x * x - y * y);
    g.dx[15] = kC3[6] * (3.0 * x * x - 3.0 * y * y);
    g.dy[15] = kC3[6] * -6.0 * x * y;
    return g;
}

Vec3 eval_sh(std::span<const double> sh, Vec3 d, int degree) {
    const auto b = sh_basis(d, degree);
    const int k_max = (degree + 1) * (degree + 1);
    Vec3 c;
    for (int ch = 0; ch < 3; ++ch) {
        double s = 0.5;
        for (int k = 0; k < k_max; ++k) s += sh[size_t(ch) * kShCoeffsPerChannel + k] * b[size_t(k)];
        c[ch] = clamp01(s);
    }
    return c;
}

Vec3 eval_sh_backward(std::span<const double> sh, Vec3 d, Vec3 upstream,
                      std::span<double> d_sh, int degree) {
    const auto b = sh_basis(d, degree);
    const auto bg = sh_basis_grad(d, degree);
    const int k_max = (degree + 1) * (degree + 1);
    Vec3 dd{};
    for (int ch = 0; ch < 3; ++ch) {
        double s = 0.5;
        for (int k = 0; k < k_max; ++k) s += sh[size_t(ch) * kShCoeffsPerChannel + k] * b[size_t(k)];
        if (s <= 0.0 || s >= 1.0) continue;  // clamped channel
        const double u = upstream[ch];
        for (int k = 0; k < k_max; ++k) {
            const double a = sh[size_t(ch) * kShCoeffsPerChannel + k];
            d_sh[size_t(ch) * kShCoeffsPerChannel + k] += u * b[size_t(k)];
            dd.x += u * a * bg.dx[size_t(k)];
            dd.y += u * a * bg.dy[size_t(k)];
            dd.z += u * a * bg.dz[size_t(k)];
        }
    }
    return dd;
}

}  // namespace qgs
