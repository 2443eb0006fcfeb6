#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ifd/tensor.hpp"

namespace ifd {

// 8-bit images on disk: binary PPM (P6) for RGB, binary PGM (P5) for
// single-channel masks. Both are written byte-deterministically.

// RGB image as a {3,H,W} tensor with values in [0,1].
Tensor read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Tensor& image);

// Single-channel 8-bit image; values are raw codes (region labels) or, for
// write_pgm_gray, floats in [0,1] quantized to 0..255.
struct GrayImage {
    int height = 0, width = 0;
    std::vector<std::uint8_t> pixels;
    std::uint8_t at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

GrayImage read_pgm(const std::string& path);
void write_pgm(const std::string& path, const GrayImage& img);
void write_pgm_gray(const std::string& path, const Tensor& gray01);

} // namespace ifd
