// Copyright Contributors to the hdrfield Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "core/common.hpp"

namespace hdrf {

enum class ImageKind { LDR, HDR };

/// H x W x 3 raster, row-major, interleaved RGB. LDR data lives in [0,1]
/// (nonlinear), HDR data is nonnegative linear radiance. The validity mask is
/// optional; empty means every pixel is valid (1 = valid).
struct ImageBuffer {
  int width{0};
  int height{0};
  ImageKind kind{ImageKind::LDR};
  std::vector<float> data;
  std::vector<std::uint8_t> mask;

  ImageBuffer() = default;
  ImageBuffer(int w, int h, ImageKind k, float fill = 0.0f)
      : width(w), height(h), kind(k), data(static_cast<std::size_t>(w) * h * 3, fill) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

  float* pixel(int u, int v) { return data.data() + (static_cast<std::size_t>(v) * width + u) * 3; }
  const float* pixel(int u, int v) const {
    return data.data() + (static_cast<std::size_t>(v) * width + u) * 3;
  }

  bool has_mask() const { return !mask.empty(); }
  bool valid_at(int u, int v) const {
    return mask.empty() || mask[static_cast<std::size_t>(v) * width + u] != 0;
  }
  void set_valid(int u, int v, bool valid) {
    if (mask.empty()) mask.assign(pixel_count(), 1);
    mask[static_cast<std::size_t>(v) * width + u] = valid ? 1 : 0;
  }

  /// Bilinear sample of one channel at continuous pixel coordinates.
  /// Horizontal wrap (panoramas), vertical clamp.
  float sample_wrapped(double u, double v, int channel) const;
};

/// Gamma-curve camera response: encode maps linear [0,1] to stored values,
/// decode is the inverse.
struct Crf {
  double gamma{2.2};

  double encode(double p) const { return std::pow(p, 1.0 / gamma); }
  double decode(double z) const { return std::pow(z, gamma); }
};

/// Well-to-fast exposure-time ratio 1/Δt_f.
struct ExposureFactor {
  double factor{1.0};
};

/// Fits gamma by golden-section search on log-gamma over [log 1, log 4],
/// minimizing Σ (p^(1/γ) - z)². Needs ≥ 3 pairs of (linear reflectance,
/// observed value), all in (0,1), not all-equal reflectances.
Crf fit_gamma(const std::vector<std::pair<double, double>>& pairs);

/// Per-channel inverse CRF; mask passes through. Input must be LDR.
ImageBuffer linearize(const ImageBuffer& img, const Crf& crf);

/// Forward imaging model: z = f(clamp(scale * r, 0, 1)).
ImageBuffer expose(const ImageBuffer& hdr, double exposure_scale, const Crf& crf);

struct MergeThresholds {
  double well_max{0.98};  // w_w = 1 iff p < well_max
  double fast_min{0.1};   // w_f = 1 iff p > fast_min
};

inline int merge_weight_well(double p, const MergeThresholds& t = {}) {
  return p < t.well_max ? 1 : 0;
}
inline int merge_weight_fast(double p, const MergeThresholds& t = {}) {
  return p > t.fast_min ? 1 : 0;
}

struct MergeResult {
  ImageBuffer hdr;
  /// 1 where no exposure produced a valid weight (saturated well, dark fast);
  /// those pixels fall back to the re-exposed fast value.
  std::vector<std::uint8_t> hole_mask;
};

/// Weighted two-exposure fusion of linearized images (per channel):
/// r = (w_w p_w + factor * w_f p_f) / (w_w + w_f). Input masks intersect.
MergeResult merge_hdr(const ImageBuffer& p_well, const ImageBuffer& p_fast,
                      const ExposureFactor& ef, const MergeThresholds& thresholds = {});

}  // namespace hdrf
