// Copyright Contributors to the hdrfield Project
// SPDX-License-Identifier: Apache-2.0
#include "core/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

#include "core/ibl.hpp"

namespace hdrf {

namespace {

constexpr double kPsnrCap = 99.0;

void require_same_dims(const ImageBuffer& a, const ImageBuffer& b) {
  require(a.width == b.width && a.height == b.height, "image dimensions mismatch");
}

inline bool both_valid(const ImageBuffer& a, const ImageBuffer& b, int u, int v) {
  return a.valid_at(u, v) && b.valid_at(u, v);
}

inline double luma709(const float* px) {
  return 0.2126 * px[0] + 0.7152 * px[1] + 0.0722 * px[2];
}

std::vector<double> gaussian_kernel(int radius, double sigma) {
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

}  // namespace

double psnr(const ImageBuffer& a, const ImageBuffer& b, double peak) {
  require_same_dims(a, b);
  require(peak > 0.0, "psnr peak must be positive");
  double sum = 0.0;
  std::size_t count = 0;
  for (int v = 0; v < a.height; ++v) {
    for (int u = 0; u < a.width; ++u) {
      if (!both_valid(a, b, u, v)) continue;
      const float* pa = a.pixel(u, v);
      const float* pb = b.pixel(u, v);
      for (int c = 0; c < 3; ++c) {
        const double d = static_cast<double>(pa[c]) - pb[c];
        sum += d * d;
      }
      count += 3;
    }
  }
  require(count > 0, "no mutually valid pixels");
  const double mse = sum / static_cast<double>(count);
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse / (peak * peak)));
}

double ssim(const ImageBuffer& a, const ImageBuffer& b, double dynamic_range) {
  require_same_dims(a, b);
  constexpr int kRadius = 5;  // 11x11 window
  require(a.width >= 2 * kRadius + 1 && a.height >= 2 * kRadius + 1,
          "image too small for the 11x11 SSIM window");
  const double c1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
  const double c2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);
  const std::vector<double> kernel = gaussian_kernel(kRadius, 1.5);

  const std::size_t n = a.pixel_count();
  std::vector<double> ya(n), yb(n);
  for (int v = 0; v < a.height; ++v) {
    for (int u = 0; u < a.width; ++u) {
      ya[static_cast<std::size_t>(v) * a.width + u] = luma709(a.pixel(u, v));
      yb[static_cast<std::size_t>(v) * a.width + u] = luma709(b.pixel(u, v));
    }
  }

  double total = 0.0;
  std::size_t windows = 0;
  for (int v = kRadius; v < a.height - kRadius; ++v) {
    for (int u = kRadius; u < a.width - kRadius; ++u) {
      bool ok = true;
      double mu_a = 0.0, mu_b = 0.0;
      for (int dy = -kRadius; dy <= kRadius && ok; ++dy) {
        for (int dx = -kRadius; dx <= kRadius; ++dx) {
          if (!both_valid(a, b, u + dx, v + dy)) {
            ok = false;
            break;
          }
          const double w = kernel[dy + kRadius] * kernel[dx + kRadius];
          const std::size_t idx = static_cast<std::size_t>(v + dy) * a.width + (u + dx);
          mu_a += w * ya[idx];
          mu_b += w * yb[idx];
        }
      }
      if (!ok) continue;
      double var_a = 0.0, var_b = 0.0, cov = 0.0;
      for (int dy = -kRadius; dy <= kRadius; ++dy) {
        for (int dx = -kRadius; dx <= kRadius; ++dx) {
          const double w = kernel[dy + kRadius] * kernel[dx + kRadius];
          const std::size_t idx = static_cast<std::size_t>(v + dy) * a.width + (u + dx);
          var_a += w * (ya[idx] - mu_a) * (ya[idx] - mu_a);
          var_b += w * (yb[idx] - mu_b) * (yb[idx] - mu_b);
          cov += w * (ya[idx] - mu_a) * (yb[idx] - mu_b);
        }
      }
      total += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
               ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
      ++windows;
    }
  }
  require(windows > 0, "no fully valid SSIM windows");
  return total / static_cast<double>(windows);
}

double PuTable::encode(double luminance) const {
  const double y = std::clamp(luminance, luminance_min, luminance_max);
  const double* p = coeffs;
  const double yp = std::pow(y, p[3]);
  const double v = p[6] * (std::pow((p[0] + p[1] * yp) / (1.0 + p[2] * yp), p[4]) - p[5]);
  return std::max(v, 0.0);
}

ImageBuffer pu_encode(const ImageBuffer& hdr, double scale, const PuTable& table) {
  require(hdr.kind == ImageKind::HDR, "pu_encode expects an HDR image");
  require(scale > 0.0, "pu scale must be positive");
  ImageBuffer out = hdr;
  for (float& v : out.data) v = static_cast<float>(table.encode(scale * v));
  return out;
}

double median_luminance(const ImageBuffer& img) {
  std::vector<double> lumas;
  lumas.reserve(img.pixel_count());
  for (int v = 0; v < img.height; ++v) {
    for (int u = 0; u < img.width; ++u) {
      if (img.valid_at(u, v)) lumas.push_back(luma709(img.pixel(u, v)));
    }
  }
  if (lumas.empty()) return 0.0;
  const std::size_t mid = lumas.size() / 2;
  std::nth_element(lumas.begin(), lumas.begin() + mid, lumas.end());
  return lumas[mid];
}

double pu_auto_scale(const ImageBuffer& reference) {
  const double median = median_luminance(reference);
  return median > 0.0 ? 100.0 / median : 1.0;
}

double pu_psnr(const ImageBuffer& a, const ImageBuffer& b, double scale, const PuTable& table) {
  const double s = scale > 0.0 ? scale : pu_auto_scale(b);
  return psnr(pu_encode(a, s, table), pu_encode(b, s, table), table.peak());
}

double pu_ssim(const ImageBuffer& a, const ImageBuffer& b, double scale, const PuTable& table) {
  const double s = scale > 0.0 ? scale : pu_auto_scale(b);
  return ssim(pu_encode(a, s, table), pu_encode(b, s, table), table.peak());
}

double rmse(const ImageBuffer& a, const ImageBuffer& b) {
  require_same_dims(a, b);
  double sum = 0.0;
  std::size_t count = 0;
  for (int v = 0; v < a.height; ++v) {
    for (int u = 0; u < a.width; ++u) {
      if (!both_valid(a, b, u, v)) continue;
      const float* pa = a.pixel(u, v);
      const float* pb = b.pixel(u, v);
      for (int c = 0; c < 3; ++c) {
        const double d = static_cast<double>(pa[c]) - pb[c];
        sum += d * d;
      }
      count += 3;
    }
  }
  require(count > 0, "no mutually valid pixels");
  return std::sqrt(sum / static_cast<double>(count));
}

double si_rmse(const ImageBuffer& a, const ImageBuffer& b) {
  require_same_dims(a, b);
  double aa = 0.0, ab = 0.0;
  for (int v = 0; v < a.height; ++v) {
    for (int u = 0; u < a.width; ++u) {
      if (!both_valid(a, b, u, v)) continue;
      const float* pa = a.pixel(u, v);
      const float* pb = b.pixel(u, v);
      for (int c = 0; c < 3; ++c) {
        aa += static_cast<double>(pa[c]) * pa[c];
        ab += static_cast<double>(pa[c]) * pb[c];
      }
    }
  }
  const double alpha = aa > 0.0 ? std::max(0.0, ab / aa) : 0.0;
  ImageBuffer scaled = a;
  for (float& v : scaled.data) v = static_cast<float>(alpha * v);
  return rmse(scaled, b);
}

double rgb_angular(const ImageBuffer& a, const ImageBuffer& b) {
  require_same_dims(a, b);
  double sum = 0.0;
  std::size_t count = 0;
  for (int v = 0; v < a.height; ++v) {
    for (int u = 0; u < a.width; ++u) {
      if (!both_valid(a, b, u, v)) continue;
      const float* pa = a.pixel(u, v);
      const float* pb = b.pixel(u, v);
      const Vec3 va(pa[0], pa[1], pa[2]);
      const Vec3 vb(pb[0], pb[1], pb[2]);
      const double na = va.norm();
      const double nb = vb.norm();
      if (na < 1e-8 || nb < 1e-8) continue;
      sum += std::acos(std::clamp(va.dot(vb) / (na * nb), -1.0, 1.0));
      ++count;
    }
  }
  if (count == 0) return 0.0;
  return sum / static_cast<double>(count) * (180.0 / 3.14159265358979323846);
}

bool MetricReport::has(const std::string& group, const std::string& name) const {
  for (const Entry& e : entries) {
    if (e.group == group && e.name == name) return true;
  }
  return false;
}

double MetricReport::at(const std::string& group, const std::string& name) const {
  for (const Entry& e : entries) {
    if (e.group == group && e.name == name) return e.value;
  }
  fail("metric not present in report: " + group + "/" + name);
}

std::string MetricReport::to_json_string() const {
  nlohmann::json groups = nlohmann::json::object();
  for (const Entry& e : entries) groups[e.group][e.name] = e.value;
  nlohmann::json j{{"groups", groups}, {"absent", absent}, {"notes", notes}};
  return j.dump(2);
}

std::string MetricReport::to_table() const {
  std::ostringstream out;
  std::string group;
  for (const Entry& e : entries) {
    if (e.group != group) {
      group = e.group;
      out << group << "\n";
    }
    char line[96];
    std::snprintf(line, sizeof(line), "  %-12s %12.6g\n", e.name.c_str(), e.value);
    out << line;
  }
  for (const auto& [key, value] : notes) out << "# " << key << ": " << value << "\n";
  return out.str();
}

MetricReport evaluate(const ImageBuffer& pred_hdr, const ImageBuffer& gt_hdr, const Crf& crf,
                      const EvaluateOptions& options) {
  require(pred_hdr.kind == ImageKind::HDR && gt_hdr.kind == ImageKind::HDR,
          "evaluation expects HDR inputs");
  require_same_dims(pred_hdr, gt_hdr);
  MetricReport report;

  if (options.groups.count("ldr") > 0) {
    ImageBuffer pred_ldr = expose(pred_hdr, options.ldr_exposure, crf);
    ImageBuffer gt_ldr = expose(gt_hdr, options.ldr_exposure, crf);
    report.entries.push_back({"ldr_pano", "psnr", psnr(pred_ldr, gt_ldr)});
    report.entries.push_back({"ldr_pano", "ssim", ssim(pred_ldr, gt_ldr)});
    report.notes["ldr_tonemap"] =
        "calibrated CRF at exposure scale " + std::to_string(options.ldr_exposure);
  }

  if (options.groups.count("hdr") > 0) {
    const double scale = options.pu_scale > 0.0 ? options.pu_scale : pu_auto_scale(gt_hdr);
    report.entries.push_back({"hdr_pano", "pu_psnr", pu_psnr(pred_hdr, gt_hdr, scale)});
    report.entries.push_back({"hdr_pano", "pu_ssim", pu_ssim(pred_hdr, gt_hdr, scale)});
    report.notes["pu_scale"] = std::to_string(scale);
  }

  if (options.groups.count("render") > 0) {
    ImageBuffer pred_render, gt_render;
    if (options.pred_render != nullptr && options.gt_render != nullptr) {
      pred_render = *options.pred_render;
      gt_render = *options.gt_render;
      report.notes["render_source"] = "external";
    } else {
      pred_render = render_ibl_probe(pred_hdr, options.render_size, options.render_samples,
                                     options.render_seed);
      gt_render = render_ibl_probe(gt_hdr, options.render_size, options.render_samples,
                                   options.render_seed);
      report.notes["render_source"] = "builtin diffuse probe";
    }
    report.entries.push_back({"hdr_render", "si_rmse", si_rmse(pred_render, gt_render)});
    report.entries.push_back({"hdr_render", "rmse", rmse(pred_render, gt_render)});
    report.entries.push_back({"hdr_render", "rgb_angular", rgb_angular(pred_render, gt_render)});
    const ImageBuffer pred_tm = expose(pred_render, options.ldr_exposure, crf);
    const ImageBuffer gt_tm = expose(gt_render, options.ldr_exposure, crf);
    report.entries.push_back({"ldr_render", "psnr", psnr(pred_tm, gt_tm)});
  }

  return report;
}

}  // namespace hdrf
