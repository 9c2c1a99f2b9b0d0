// Copyright Contributors to the hdrfield Project
// SPDX-License-Identifier: Apache-2.0
#include "core/image.hpp"

#include <algorithm>
#include <cmath>

namespace hdrf {

float ImageBuffer::sample_wrapped(double u, double v, int channel) const {
  const double fu = std::floor(u);
  const double fv = std::floor(v);
  const double au = u - fu;
  const double av = v - fv;
  const int u0 = ((static_cast<int>(fu) % width) + width) % width;
  const int u1 = (u0 + 1) % width;
  const int v0 = std::clamp(static_cast<int>(fv), 0, height - 1);
  const int v1 = std::clamp(static_cast<int>(fv) + 1, 0, height - 1);
  const double top = (1.0 - au) * pixel(u0, v0)[channel] + au * pixel(u1, v0)[channel];
  const double bot = (1.0 - au) * pixel(u0, v1)[channel] + au * pixel(u1, v1)[channel];
  return static_cast<float>((1.0 - av) * top + av * bot);
}

Crf fit_gamma(const std::vector<std::pair<double, double>>& pairs) {
  require(pairs.size() >= 3, "need at least 3 calibration pairs");
  bool varied = false;
  for (const auto& [p, z] : pairs) {
    require(p > 0.0 && p < 1.0 && z > 0.0 && z < 1.0,
            "calibration values must lie strictly inside (0,1)");
    if (p != pairs.front().first) varied = true;
  }
  require(varied, "degenerate calibration pairs (all reflectances equal)");

  const auto objective = [&](double log_gamma) {
    const double inv_gamma = std::exp(-log_gamma);
    double sum = 0.0;
    for (const auto& [p, z] : pairs) {
      const double r = std::pow(p, inv_gamma) - z;
      sum += r * r;
    }
    return sum;
  };

  // Golden-section search on log-gamma over [log 1, log 4].
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.0, b = std::log(4.0);
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = objective(c), fd = objective(d);
  while (b - a > 1e-6) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = objective(d);
    }
  }
  return Crf{std::exp(0.5 * (a + b))};
}

ImageBuffer linearize(const ImageBuffer& img, const Crf& crf) {
  require(img.kind == ImageKind::LDR, "linearize expects an LDR image");
  ImageBuffer out = img;
  if (crf.gamma == 1.0) return out;
  for (float& v : out.data) v = static_cast<float>(crf.decode(v));
  return out;
}

ImageBuffer expose(const ImageBuffer& hdr, double exposure_scale, const Crf& crf) {
  require(exposure_scale > 0.0, "exposure scale must be positive");
  ImageBuffer out = hdr;
  out.kind = ImageKind::LDR;
  for (float& v : out.data) {
    const double p = std::clamp(exposure_scale * static_cast<double>(v), 0.0, 1.0);
    v = static_cast<float>(crf.encode(p));
  }
  return out;
}

MergeResult merge_hdr(const ImageBuffer& p_well, const ImageBuffer& p_fast,
                      const ExposureFactor& ef, const MergeThresholds& thresholds) {
  require(p_well.width == p_fast.width && p_well.height == p_fast.height,
          "exposure pair dimensions mismatch");
  require(ef.factor > 0.0, "exposure factor must be positive");

  MergeResult result;
  result.hdr = ImageBuffer(p_well.width, p_well.height, ImageKind::HDR);
  result.hole_mask.assign(result.hdr.pixel_count(), 0);
  if (p_well.has_mask() || p_fast.has_mask()) {
    result.hdr.mask.assign(result.hdr.pixel_count(), 1);
  }

  for (int v = 0; v < p_well.height; ++v) {
    for (int u = 0; u < p_well.width; ++u) {
      const bool valid = p_well.valid_at(u, v) && p_fast.valid_at(u, v);
      if (result.hdr.has_mask()) result.hdr.set_valid(u, v, valid);
      if (!valid) continue;
      const float* pw = p_well.pixel(u, v);
      const float* pf = p_fast.pixel(u, v);
      float* r = result.hdr.pixel(u, v);
      bool hole = false;
      for (int c = 0; c < 3; ++c) {
        const double w = pw[c];
        const double f = pf[c];
        const int ww = merge_weight_well(w, thresholds);
        const int wf = merge_weight_fast(f, thresholds);
        if (ww + wf > 0) {
          r[c] = static_cast<float>((ww * w + ef.factor * wf * f) / (ww + wf));
        } else {
          // No valid observation: the fast value still bounds radiance from
          // below, while the saturated well pixel carries no magnitude.
          r[c] = static_cast<float>(ef.factor * f);
          hole = true;
        }
      }
      if (hole) result.hole_mask[static_cast<std::size_t>(v) * p_well.width + u] = 1;
    }
  }
  return result;
}

}  // namespace hdrf
