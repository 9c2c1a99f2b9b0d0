// Copyright Contributors to the hdrfield Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "core/image.hpp"

namespace hdrf {

/// Renders the built-in probe scene (diffuse sphere over a ground plane) lit
/// by an equirectangular HDR environment map: direct lighting only,
/// cosine-weighted hemisphere integration, deterministic sample set.
ImageBuffer render_ibl_probe(const ImageBuffer& envmap, int size, int samples = 512,
                             std::uint64_t seed = 0);

}  // namespace hdrf
