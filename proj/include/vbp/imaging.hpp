#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vbp/tensor.hpp"

namespace vbp {

/// 8-bit grayscale (1 channel) or RGB (3 channel) raster, row-major
/// top-to-bottom, pixel-interleaved for RGB.
struct Image {
    int width = 0, height = 0, channels = 1;
    std::vector<std::uint8_t> pixels;
};

/// Binary netpbm: P5 (grayscale) or P6 (RGB), maxval 255 only.
Image load_image(const std::filesystem::path& path);
void save_image(const Image& img, const std::filesystem::path& path);

/// Scales to [0,1]; shape (1,H,W) for grayscale, (3,H,W) for RGB.
Tensor to_input_tensor(const Image& img);

/// Red mask overlay on a grayscale image:
/// R = max(g, round(255*mask)), G = B = round(g*(1-mask)).
Image overlay_red(const Image& gray, const Tensor& mask);

}  // namespace vbp
