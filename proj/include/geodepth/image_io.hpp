#pragma once

#include <string>

#include "geodepth/image.hpp"

namespace geodepth {

/// 8-bit PNG; values in [0, 1] are rounded to 0..255. Supports 1 or 3 channels.
void write_png8(const std::string& path, const Image& image);
/// Reads 8-bit gray/RGB(A) PNG into [0, 1]; alpha is dropped.
Image read_png8(const std::string& path);

/// 16-bit single-channel PNG holding depth in millimetres, 0 = invalid.
void write_depth_png16(const std::string& path, const Image& depth);
Image read_depth_png16(const std::string& path);

/// Single-channel little-endian float32 PFM ("Pf", negative scale).
void write_pfm(const std::string& path, const Image& map);
Image read_pfm(const std::string& path);

}  // namespace geodepth
