#include "uedsr/metrics.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "uedsr/errors.hpp"

namespace uedsr {

double mean_squared_error(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) throw GeometryError("mse: size mismatch or empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum / static_cast<double>(a.size());
}

double psnr(std::span<const double> a, std::span<const double> b, double peak) {
    if (!(peak > 0.0)) throw RangeError("psnr peak must be positive");
    const double mse = mean_squared_error(a, b);
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

double psnr(const Image& a, const Image& b, double peak) {
    require_same_geometry(a, b, "psnr");
    return psnr(a.pixels(), b.pixels(), peak);
}

namespace {

std::vector<double> gaussian_kernel(int size, double sigma) {
    std::vector<double> k(static_cast<std::size_t>(size));
    const double centre = (size - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        k[i] = std::exp(-((i - centre) * (i - centre)) / (2.0 * sigma * sigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

// 'valid' separable filtering; output is (w - n + 1) x (h - n + 1).
std::vector<double> filter_valid(const std::vector<double>& src, int w, int h, const std::vector<double>& k) {
    const int n = static_cast<int>(k.size());
    const int ow = w - n + 1, oh = h - n + 1;
    std::vector<double> rows(static_cast<std::size_t>(ow) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += k[i] * src[static_cast<std::size_t>(y) * w + x + i];
            rows[static_cast<std::size_t>(y) * ow + x] = s;
        }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += k[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    return out;
}

}  // namespace

double ssim(const Image& a, const Image& b, const SsimOptions& options) {
    require_same_geometry(a, b, "ssim");
    const int n = options.window;
    if (a.width() < n || a.height() < n)
        throw GeometryError("ssim: image " + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                            " smaller than the " + std::to_string(n) + "x" + std::to_string(n) + " window");
    const auto k = gaussian_kernel(n, options.sigma);
    const int w = a.width(), h = a.height();
    const auto pa = a.pixels();
    const auto pb = b.pixels();
    std::vector<double> va(pa.begin(), pa.end()), vb(pb.begin(), pb.end());
    std::vector<double> aa(va.size()), bb(va.size()), ab(va.size());
    for (std::size_t i = 0; i < va.size(); ++i) {
        aa[i] = va[i] * va[i];
        bb[i] = vb[i] * vb[i];
        ab[i] = va[i] * vb[i];
    }
    const auto mu_a = filter_valid(va, w, h, k);
    const auto mu_b = filter_valid(vb, w, h, k);
    const auto e_aa = filter_valid(aa, w, h, k);
    const auto e_bb = filter_valid(bb, w, h, k);
    const auto e_ab = filter_valid(ab, w, h, k);

    double total = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double ma = mu_a[i], mb = mu_b[i];
        const double var_a = e_aa[i] - ma * ma;
        const double var_b = e_bb[i] - mb * mb;
        const double cov = e_ab[i] - ma * mb;
        const double num = (2.0 * ma * mb + options.c1) * (2.0 * cov + options.c2);
        const double den = (ma * ma + mb * mb + options.c1) * (var_a + var_b + options.c2);
        total += num / den;
    }
    return total / static_cast<double>(mu_a.size());
}

}  // namespace uedsr
