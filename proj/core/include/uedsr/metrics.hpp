#pragma once

#include <span>

#include "uedsr/image.hpp"

namespace uedsr {

// PSNR of identical inputs.
inline constexpr double kPsnrCap = 100.0;

double mean_squared_error(std::span<const double> a, std::span<const double> b);

// 10 log10(peak^2 / MSE), capped at kPsnrCap.
double psnr(std::span<const double> a, std::span<const double> b, double peak);
double psnr(const Image& a, const Image& b, double peak = 1.0);

struct SsimOptions {
    int window = 11;
    double sigma = 1.5;
    double c1 = 0.01 * 0.01;
    double c2 = 0.03 * 0.03;
};

// Mean of the local SSIM map over all window positions that fit inside the
// image (Gaussian-weighted window).
double ssim(const Image& a, const Image& b, const SsimOptions& options = {});

}  // namespace uedsr
