#include "uedsr/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

#include "uedsr/errors.hpp"

namespace uedsr {
namespace {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw IntegrityError(path.string(), "cannot open png");
    return f;
}

void write_rows(const std::filesystem::path& path, int width, int height, int bit_depth, int color_type,
                std::vector<png_bytep>& rows) {
    FilePtr file = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IntegrityError(path.string(), "png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IntegrityError(path.string(), "png encoding failed");
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
                 color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16) png_set_swap(png);  // rows are host (little-endian) order
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png16(const std::filesystem::path& path, const Image& image) {
    std::vector<std::uint16_t> levels(image.size());
    const auto px = image.pixels();
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const double v = px[i] < 0.0 ? 0.0 : (px[i] > 1.0 ? 1.0 : px[i]);
        levels[i] = static_cast<std::uint16_t>(std::lround(v * 65535.0));
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(image.height()));
    for (int y = 0; y < image.height(); ++y)
        rows[y] = reinterpret_cast<png_bytep>(levels.data() + static_cast<std::size_t>(y) * image.width());
    write_rows(path, image.width(), image.height(), 16, PNG_COLOR_TYPE_GRAY, rows);
}

void write_png_rgb8(const std::filesystem::path& path, int width, int height,
                    const std::vector<std::uint8_t>& rgb) {
    if (rgb.size() != static_cast<std::size_t>(width) * height * 3) throw GeometryError("rgb buffer size mismatch");
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y)
        rows[y] = const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(y) * width * 3);
    write_rows(path, width, height, 8, PNG_COLOR_TYPE_RGB, rows);
}

Image read_png16(const std::filesystem::path& path) {
    FilePtr file = open_file(path, "rb");
    png_byte signature[8] = {};
    if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0)
        throw IntegrityError(path.string(), "not a png file");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IntegrityError(path.string(), "png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    std::vector<std::uint16_t> levels;
    std::vector<png_bytep> rows;
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IntegrityError(path.string(), "corrupt png");
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (color != PNG_COLOR_TYPE_GRAY || depth != 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IntegrityError(path.string(), "expected 16-bit grayscale png");
    }
    png_set_swap(png);
    png_read_update_info(png, info);
    levels.resize(static_cast<std::size_t>(width) * height);
    rows.resize(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y)
        rows[y] = reinterpret_cast<png_bytep>(levels.data() + static_cast<std::size_t>(y) * width);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    std::vector<double> pixels(levels.size());
    for (std::size_t i = 0; i < levels.size(); ++i) pixels[i] = static_cast<double>(levels[i]) / 65535.0;
    return Image(width, height, std::move(pixels));
}

}  // namespace uedsr
