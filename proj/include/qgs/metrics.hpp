#pragma once

#include "qgs/image.hpp"

namespace qgs {

// Image losses and quality metrics. SSIM uses an 11x11 Gaussian window with
// sigma 1.5 normalized to unit sum, zero-padded same-size convolution,
// stability constants C1 = 0.01^2 and C2 = 0.03^2 for unit dynamic range,
// averaged over pixels and channels.

double l1(const Image& a, const Image& b);
double mse(const Image& a, const Image& b);

// 10*log10(1/MSE), capped at 99 dB for (near-)identical images.
double psnr(const Image& a, const Image& b);

double ssim(const Image& a, const Image& b);

// (1 - lambda) * L1 + lambda * (1 - SSIM) / 2
double loss(const Image& rendered, const Image& target, double lambda);

// dLoss/drendered, analytic (the SSIM term backpropagates through the blurs,
// which are self-adjoint for a symmetric zero-padded window).
Image loss_backward(const Image& rendered, const Image& target, double lambda);

}  // namespace qgs
