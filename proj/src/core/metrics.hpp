// Copyright Contributors to the hdrfield Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "core/image.hpp"

namespace hdrf {

/// -10 log10(MSE / peak^2) over mask-intersected pixels; capped at 99 dB.
double psnr(const ImageBuffer& a, const ImageBuffer& b, double peak = 1.0);

/// Mean local SSIM on Rec.709 luma, 11x11 Gaussian window (sigma 1.5),
/// C1=(0.01 L)^2, C2=(0.03 L)^2. Windows must lie fully inside the image and
/// contain only mask-valid pixels.
double ssim(const ImageBuffer& a, const ImageBuffer& b, double dynamic_range = 1.0);

/// Perceptually-uniform transfer for absolute luminance, from the published
/// banding+glare coefficient fit. Valid domain [0.005, 10000] cd/m².
struct PuTable {
  double coeffs[7] = {0.353487901,   0.3734658629, 8.277049286e-05, 0.9062562627,
                      0.09150303166, 0.9099517204, 596.3148142};
  double luminance_min{0.005};
  double luminance_max{10000.0};

  double encode(double luminance) const;
  /// Encoded-domain maximum, i.e. encode(luminance_max).
  double peak() const { return encode(luminance_max); }
};

/// Applies the PU transfer per channel after mapping values to absolute
/// luminance with `scale` (cd/m² per radiance unit).
ImageBuffer pu_encode(const ImageBuffer& hdr, double scale, const PuTable& table = {});

double median_luminance(const ImageBuffer& img);

/// Scale such that the image's median luma maps to 100 cd/m²; 1.0 for
/// empty/black images.
double pu_auto_scale(const ImageBuffer& reference);

/// psnr/ssim after pu_encode with peak = encoded-domain maximum.
/// scale <= 0 selects pu_auto_scale(b).
double pu_psnr(const ImageBuffer& a, const ImageBuffer& b, double scale = 0.0,
               const PuTable& table = {});
double pu_ssim(const ImageBuffer& a, const ImageBuffer& b, double scale = 0.0,
               const PuTable& table = {});

double rmse(const ImageBuffer& a, const ImageBuffer& b);
/// min over alpha >= 0 of rmse(alpha*a, b); alpha = <a,b>/<a,a> clamped at 0.
double si_rmse(const ImageBuffer& a, const ImageBuffer& b);
/// Mean per-pixel angle between RGB vectors, degrees. Pixels where either
/// norm is below 1e-8 are skipped.
double rgb_angular(const ImageBuffer& a, const ImageBuffer& b);

struct MetricReport {
  struct Entry {
    std::string group;  // ldr_pano | hdr_pano | hdr_render | ldr_render
    std::string name;
    double value;
  };
  std::vector<Entry> entries;
  std::vector<std::string> absent{"lpips", "hdr_vdp3"};  // reserved, not computed
  std::map<std::string, std::string> notes;

  bool has(const std::string& group, const std::string& name) const;
  double at(const std::string& group, const std::string& name) const;
  std::string to_json_string() const;
  std::string to_table() const;
};

struct EvaluateOptions {
  std::set<std::string> groups{"ldr", "hdr"};  // "ldr", "hdr", "render"
  double ldr_exposure{1.0};  // exposure scale for the tone-mapped LDR group
  double pu_scale{0.0};      // 0 = auto from gt median
  int render_size{96};
  int render_samples{512};
  std::uint64_t render_seed{0};
  // Externally produced renders; when null and "render" is requested, the
  // built-in diffuse probe scene is rendered from the environment maps.
  const ImageBuffer* pred_render{nullptr};
  const ImageBuffer* gt_render{nullptr};
};

MetricReport evaluate(const ImageBuffer& pred_hdr, const ImageBuffer& gt_hdr, const Crf& crf,
                      const EvaluateOptions& options = {});

}  // namespace hdrf
