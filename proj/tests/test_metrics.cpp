#include <array>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "qgs/metrics.hpp"
#include "qgs/rng.hpp"

using namespace qgs;

namespace {

Image random_image(Rng& rng, int w, int h) {
    Image img(w, h);
    for (double& v : img.px) v = rng.uniform(0.0, 1.0);
    return img;
}

// Independent SSIM reference: direct dense 11x11 2D convolution, no
// separability, no shared code with the metrics implementation.
double reference_ssim(const Image& a, const Image& b) {
    const int w = a.width, h = a.height;
    std::array<std::array<double, 11>, 11> win{};
    double wsum = 0.0;
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
            const double di = i - 5, dj = j - 5;
            win[size_t(i)][size_t(j)] =
                std::exp(-di * di / (2 * 1.5 * 1.5)) * std::exp(-dj * dj / (2 * 1.5 * 1.5));
            wsum += win[size_t(i)][size_t(j)];
        }
    for (auto& row : win)
        for (double& v : row) v /= wsum;

    auto conv = [&](const Image& img, int ch, int x, int y, bool sq, const Image* other) {
        double acc = 0.0;
        for (int i = 0; i < 11; ++i)
            for (int j = 0; j < 11; ++j) {
                const int yy = y + i - 5, xx = x + j - 5;
                if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                double v = img.at(xx, yy)[ch];
                if (sq) v *= v;
                if (other != nullptr) v = img.at(xx, yy)[ch] * other->at(xx, yy)[ch];
                acc += win[size_t(i)][size_t(j)] * v;
            }
        return acc;
    };

    const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
    double total = 0.0;
    for (int ch = 0; ch < 3; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double mx = conv(a, ch, x, y, false, nullptr);
                const double my = conv(b, ch, x, y, false, nullptr);
                const double vx = conv(a, ch, x, y, true, nullptr) - mx * mx;
                const double vy = conv(b, ch, x, y, true, nullptr) - my * my;
                const double vxy = conv(a, ch, x, y, false, &b) - mx * my;
                total += ((2 * mx * my + C1) * (2 * vxy + C2)) /
                         ((mx * mx + my * my + C1) * (vx + vy + C2));
            }
    return total / (3.0 * w * h);
}

}  // namespace

TEST_CASE("identical images: zero loss, unit ssim, capped psnr") {
    Rng rng(71);
    const Image a = random_image(rng, 16, 12);
    CHECK(loss(a, a, 0.2) == 0.0);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(psnr(a, a) == 99.0);
    CHECK(l1(a, a) == 0.0);
}

TEST_CASE("pure L1 loss of all-ones vs all-zeros is one") {
    Image render(8, 8), target(8, 8);
    for (double& v : render.px) v = 1.0;
    CHECK(loss(render, target, 0.0) == doctest::Approx(1.0));
}

TEST_CASE("psnr closed forms") {
    Image a(10, 10), b(10, 10);
    for (double& v : a.px) v = 0.1;  // uniform error 0.1 -> MSE 0.01 -> 20 dB
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("ssim matches the dense reference on random pairs") {
    Rng rng(72);
    for (int trial = 0; trial < 20; ++trial) {
        const int w = 8 + int(rng.uniform_index(18));
        const int h = 8 + int(rng.uniform_index(18));
        const Image a = random_image(rng, w, h);
        Image b = a;
        if (trial % 2 == 0) b = random_image(rng, w, h);
        else
            for (double& v : b.px) v = clamp01(v + rng.uniform(-0.05, 0.05));
        CHECK(std::fabs(ssim(a, b) - reference_ssim(a, b)) < 1e-6);
    }
}

TEST_CASE("ssim is symmetric and bounded by one") {
    Rng rng(73);
    const Image a = random_image(rng, 14, 9);
    const Image b = random_image(rng, 14, 9);
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
    CHECK(ssim(a, b) <= 1.0);
}

TEST_CASE("loss gradient matches finite differences including the ssim term") {
    Rng rng(74);
    const int w = 9, h = 7;
    Image render = random_image(rng, w, h);
    const Image target = random_image(rng, w, h);
    const double lambda = 0.35;

    const Image grad = loss_backward(render, target, lambda);
    const double h_fd = 1e-6;
    for (size_t i = 0; i < render.px.size(); i += 11) {
        const double orig = render.px[i];
        render.px[i] = orig + h_fd;
        const double fp = loss(render, target, lambda);
        render.px[i] = orig - h_fd;
        const double fm = loss(render, target, lambda);
        render.px[i] = orig;
        const double fd = (fp - fm) / (2 * h_fd);
        CHECK(grad.px[i] == doctest::Approx(fd).epsilon(5e-4));
    }
}

TEST_CASE("dimension mismatch raises") {
    Image a(4, 4), b(5, 4);
    CHECK_THROWS(loss(a, b, 0.2));
    CHECK_THROWS(ssim(a, b));
}
