#include "uedsr/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "uedsr/errors.hpp"

namespace uedsr {

Image::Image(int width, int height, double fill)
    : width_(width), height_(height),
      pixels_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), fill) {
    if (width < 0 || height < 0) throw GeometryError("negative image dimensions");
}

Image::Image(int width, int height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width < 0 || height < 0 ||
        pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw GeometryError("pixel buffer does not match " + std::to_string(width) + "x" +
                            std::to_string(height));
    }
}

Image area_downsample(const Image& image, int factor) {
    if (factor < 1 || image.width() % factor != 0 || image.height() % factor != 0) {
        throw GeometryError("image " + std::to_string(image.width()) + "x" +
                            std::to_string(image.height()) + " not divisible by " +
                            std::to_string(factor));
    }
    if (factor == 1) return image;
    const int w = image.width() / factor;
    const int h = image.height() / factor;
    const double inv = 1.0 / (static_cast<double>(factor) * factor);
    Image out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double sum = 0.0;
            for (int dy = 0; dy < factor; ++dy)
                for (int dx = 0; dx < factor; ++dx) sum += image.at(x * factor + dx, y * factor + dy);
            out.at(x, y) = sum * inv;
        }
    }
    return out;
}

double quantize16(double value) {
    const double clamped = std::clamp(value, 0.0, 1.0);
    const auto level = static_cast<long>(std::lround(clamped * 65535.0));
    return static_cast<double>(level) / 65535.0;
}

Image quantize16(const Image& image) {
    Image out = image;
    for (double& v : out.pixels()) v = quantize16(v);
    return out;
}

void require_same_geometry(const Image& a, const Image& b, const char* what) {
    if (!a.same_geometry(b)) {
        throw GeometryError(std::string(what) + ": geometry mismatch " + std::to_string(a.width()) +
                            "x" + std::to_string(a.height()) + " vs " + std::to_string(b.width()) +
                            "x" + std::to_string(b.height()));
    }
}

}  // namespace uedsr
