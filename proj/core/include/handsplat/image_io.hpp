#pragma once

#include <string>

#include "handsplat/types.hpp"

namespace handsplat {

// 8-bit PNG. Values are clamped to [0,1] and quantized on write; reads
// return values in [0,1]. Channels: 1 (gray) or 3 (RGB).
void save_png(const Image& img, const std::string& path);
Image load_png(const std::string& path);

// Portable FloatMap, single channel f32 little-endian, bottom-up rows.
void save_pfm(const Image& img, const std::string& path);
Image load_pfm(const std::string& path);

}  // namespace handsplat
