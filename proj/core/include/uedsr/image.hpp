#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace uedsr {

// Single-channel image, row-major, intensities nominally in [0, 1].
class Image {
public:
    Image() = default;
    Image(int width, int height, double fill = 0.0);
    Image(int width, int height, std::vector<double> pixels);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return pixels_.size(); }
    bool empty() const noexcept { return pixels_.empty(); }

    double& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
    double at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

    std::span<double> pixels() noexcept { return pixels_; }
    std::span<const double> pixels() const noexcept { return pixels_; }

    bool same_geometry(const Image& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

    friend bool operator==(const Image&, const Image&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> pixels_;
};

// Box (area) downsampling by an integer factor. Throws GeometryError when the
// image dimensions are not divisible by the factor.
Image area_downsample(const Image& image, int factor);

// Rounds every pixel to the nearest multiple of 1/65535 after clamping to [0,1].
// Quantized images survive a 16-bit PNG round trip bit-exactly.
Image quantize16(const Image& image);
double quantize16(double value);

void require_same_geometry(const Image& a, const Image& b, const char* what);

}  // namespace uedsr
