// Copyright Contributors to the hdrfield Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "core/image.hpp"

namespace hdrf {

// File formats:
//   LDR  -> 8-bit RGB PNG, values mapped by round(z * 255)
//   HDR  -> PFM ("PF\n<w> <h>\n-1.0\n", float32 little-endian, rows bottom-up)
//   mask -> 8-bit single-channel PNG, 255 = valid

void write_png(const std::string& path, const ImageBuffer& img);
ImageBuffer read_png(const std::string& path);

void write_pfm(const std::string& path, const ImageBuffer& img);
ImageBuffer read_pfm(const std::string& path);

void write_mask_png(const std::string& path, const std::vector<std::uint8_t>& mask, int width,
                    int height);
std::vector<std::uint8_t> read_mask_png(const std::string& path, int& width, int& height);

/// Dispatch by extension: .png -> LDR, .pfm -> HDR.
void write_image(const std::string& path, const ImageBuffer& img);
ImageBuffer read_image(const std::string& path);

}  // namespace hdrf
