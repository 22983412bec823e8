#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "uedsr/errors.hpp"
#include "uedsr/metrics.hpp"

using namespace uedsr;
using uedsr::testing::random_image;

namespace {

// Direct evaluation of the windowed statistics at every valid position.
double ssim_oracle(const Image& a, const Image& b, int n = 11, double sigma = 1.5) {
    std::vector<double> g(n);
    double gs = 0.0;
    for (int i = 0; i < n; ++i) gs += g[i] = std::exp(-std::pow(i - (n - 1) / 2.0, 2) / (2 * sigma * sigma));
    const double c1 = 1e-4, c2 = 9e-4;
    double total = 0.0;
    int count = 0;
    for (int y0 = 0; y0 + n <= a.height(); ++y0)
        for (int x0 = 0; x0 + n <= a.width(); ++x0) {
            double ma = 0, mb = 0;
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i) {
                    const double w = g[i] * g[j] / (gs * gs);
                    ma += w * a.at(x0 + i, y0 + j);
                    mb += w * b.at(x0 + i, y0 + j);
                }
            double va = 0, vb = 0, cov = 0;
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i) {
                    const double w = g[i] * g[j] / (gs * gs);
                    const double da = a.at(x0 + i, y0 + j) - ma, db = b.at(x0 + i, y0 + j) - mb;
                    va += w * da * da;
                    vb += w * db * db;
                    cov += w * da * db;
                }
            total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    return total / count;
}

}  // namespace

TEST(Psnr, Fixtures) {
    std::vector<double> a(100, 10.0), b(100, 11.0);
    EXPECT_NEAR(psnr(a, b, 255.0), 48.1308, 1e-3);
    EXPECT_NEAR(psnr(a, b, 255.0), 20.0 * std::log10(255.0), 1e-12);
    EXPECT_NEAR(psnr(Image(5, 5, 0.3), Image(5, 5, 0.4)), 20.0, 1e-9);
    EXPECT_EQ(psnr(Image(5, 5, 0.3), Image(5, 5, 0.3)), kPsnrCap);
    EXPECT_EQ(psnr(Image(5, 5, 0.3), Image(5, 5, 0.3 + 1e-9)), kPsnrCap);
}

TEST(Psnr, MatchesMeanSquaredError) {
    std::mt19937_64 rng(81);
    const Image a = random_image(rng, 12, 9), b = random_image(rng, 12, 9);
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mse += std::pow(a.pixels()[i] - b.pixels()[i], 2) / a.size();
    EXPECT_NEAR(mean_squared_error(a.pixels(), b.pixels()), mse, 1e-15);
    EXPECT_NEAR(psnr(a, b), -10.0 * std::log10(mse), 1e-12);
    EXPECT_DOUBLE_EQ(psnr(a, b), psnr(b, a));
}

TEST(Psnr, Errors) {
    EXPECT_THROW(psnr(Image(4, 4), Image(4, 5)), GeometryError);
    EXPECT_THROW(psnr(Image(4, 4), Image(4, 4), 0.0), RangeError);
}

TEST(Ssim, IdenticalIsExactlyOne) {
    std::mt19937_64 rng(82);
    for (int i = 0; i < 5; ++i) {
        const Image a = random_image(rng, 11 + i * 3, 11 + i);
        EXPECT_EQ(ssim(a, a), 1.0);
    }
}

TEST(Ssim, ConstantOffsetClosedForm) {
    for (auto [c, d] : {std::pair{0.2, 0.1}, std::pair{0.5, -0.3}, std::pair{0.0, 0.6}, std::pair{0.9, 0.05}}) {
        const double c1 = 1e-4;
        const double expected = (2 * c * (c + d) + c1) / (c * c + (c + d) * (c + d) + c1);
        EXPECT_NEAR(ssim(Image(16, 13, c), Image(16, 13, c + d)), expected, 1e-6) << c << " " << d;
    }
}

TEST(Ssim, MatchesWindowOracle) {
    std::mt19937_64 rng(83);
    for (int i = 0; i < 3; ++i) {
        const Image a = random_image(rng, 15, 13);
        Image b = a;
        for (double& v : b.pixels()) v = std::clamp(v + std::normal_distribution<double>(0, 0.1)(rng), 0.0, 1.0);
        EXPECT_NEAR(ssim(a, b), ssim_oracle(a, b), 1e-12);
    }
}

TEST(Ssim, InvertedImageScoresBelowOne) {
    std::mt19937_64 rng(84);
    const Image a = random_image(rng, 20, 20);
    Image inv = a;
    for (double& v : inv.pixels()) v = 1.0 - v;
    const double s = ssim(a, inv);
    EXPECT_LT(s, 1.0);
    EXPECT_GE(s, -1.0);
    EXPECT_DOUBLE_EQ(s, ssim(inv, a));
}

TEST(Ssim, Errors) {
    EXPECT_THROW(ssim(Image(10, 20), Image(10, 20)), GeometryError);
    EXPECT_THROW(ssim(Image(12, 12), Image(12, 13)), GeometryError);
}
