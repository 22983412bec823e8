#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "uedsr/image.hpp"

namespace uedsr {

// 16-bit grayscale PNG. Values are clamped to [0,1] and stored as
// round(v * 65535); reading returns level / 65535.
void write_png16(const std::filesystem::path& path, const Image& image);
Image read_png16(const std::filesystem::path& path);

// 8-bit RGB PNG, interleaved rows.
void write_png_rgb8(const std::filesystem::path& path, int width, int height,
                    const std::vector<std::uint8_t>& rgb);

}  // namespace uedsr
