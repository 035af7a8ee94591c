#pragma once

#include <string>

#include "deva/image.hpp"

namespace deva {

// Format is chosen by extension: .png, or .pgm/.ppm (binary PNM).
// Depth images are 16-bit grayscale, RGB images 8-bit, masks 8-bit grayscale
// with 255 = dynamic and 0 = keep.

RgbImage read_rgb(const std::string& path);
Raw16Image read_raw16(const std::string& path);
BinaryMask read_mask(const std::string& path);  // >= 128 counts as dynamic

void write_rgb(const std::string& path, const RgbImage& img);
void write_raw16(const std::string& path, const Raw16Image& img);
void write_mask(const std::string& path, const BinaryMask& mask);
void write_gray8(const std::string& path, const GrayImage& img);  // clamped to [0,255]

}  // namespace deva
