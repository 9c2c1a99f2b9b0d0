// Copyright Contributors to the hdrfield Project
// SPDX-License-Identifier: Apache-2.0
#include "core/renderer.hpp"

#include <cmath>
#include <thread>

#include "core/rng.hpp"

namespace hdrf {

std::vector<RaySample> sample_points(double t_near, double t_far, int n_samples, bool stratified,
                                     std::uint64_t seed, std::uint64_t ray_counter) {
  require(n_samples >= 1, "need at least one sample per ray");
  require(t_near < t_far, "t_near must be below t_far");
  const double width = (t_far - t_near) / n_samples;
  std::vector<RaySample> out(n_samples);
  if (!stratified) {
    for (int i = 0; i < n_samples; ++i) {
      out[i].t = t_near + (i + 0.5) * width;
      out[i].delta = width;
    }
    return out;
  }
  for (int i = 0; i < n_samples; ++i) {
    const double xi = rng_uniform(seed, RngStream::kRayJitter, ray_counter, i);
    out[i].t = t_near + (i + xi) * width;
  }
  for (int i = 0; i + 1 < n_samples; ++i) out[i].delta = out[i + 1].t - out[i].t;
  out[n_samples - 1].delta = t_far - out[n_samples - 1].t;
  return out;
}

void RayBatch::validate() const {
  require(directions.size() == origins.size(), "ray batch arrays must be index-aligned");
  require(t_near < t_far, "t_near must be below t_far");
  for (const Vec3& d : directions) {
    require(std::abs(d.norm() - 1.0) <= 1e-9, "ray directions must be unit-norm");
  }
  const auto check_size = [&](std::size_t n, const char* what) {
    require(n == 0 || n == origins.size(), std::string("ray batch field size mismatch: ") + what);
  };
  check_size(target_well.size(), "target_well");
  check_size(target_fast.size(), "target_fast");
  check_size(has_well.size(), "has_well");
  check_size(has_fast.size(), "has_fast");
  check_size(valid.size(), "valid");
}

CompositeElement composite(std::span<const double> sigma, std::span<const RaySample> samples,
                           std::span<const Vec3> color_well, std::span<const Vec3> color_fast) {
  CompositeElement out;
  double transmittance = 1.0;
  double depth_acc = 0.0;
  const std::size_t n = sigma.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double alpha = 1.0 - std::exp(-sigma[i] * samples[i].delta);
    const double w = transmittance * alpha;
    out.z_well += w * color_well[i];
    if (!color_fast.empty()) out.z_fast += w * color_fast[i];
    out.opacity += w;
    depth_acc += w * samples[i].t;
    transmittance *= 1.0 - alpha;
  }
  out.depth = depth_acc / std::max(out.opacity, 1e-6);
  return out;
}

void composite_backward(std::span<const double> sigma, std::span<const RaySample> samples,
                        std::span<const Vec3> color_well, std::span<const Vec3> color_fast,
                        const Vec3& d_z_well, const Vec3& d_z_fast, std::span<double> d_sigma,
                        std::span<Vec3> d_color_well, std::span<Vec3> d_color_fast) {
  const std::size_t n = sigma.size();
  const bool fast = !color_fast.empty();

  // forward sweep for per-sample transmittance and weights
  std::vector<double> alpha(n), weight(n);
  double transmittance = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    alpha[i] = 1.0 - std::exp(-sigma[i] * samples[i].delta);
    weight[i] = transmittance * alpha[i];
    d_color_well[i] = weight[i] * d_z_well;
    if (fast) d_color_fast[i] = weight[i] * d_z_fast;
    transmittance *= 1.0 - alpha[i];
  }

  // Reverse sweep. With q_i = Σ_{j>i} Π_{i<k<j}(1-α_k) α_j c_j (the pixel
  // value seen by a ray that survives past i), ∂z/∂α_i = T_i (c_i - q_i).
  Vec3 q_well = Vec3::Zero();
  Vec3 q_fast = Vec3::Zero();
  transmittance = 1.0;
  std::vector<double> t_before(n);
  for (std::size_t i = 0; i < n; ++i) {
    t_before[i] = transmittance;
    transmittance *= 1.0 - alpha[i];
  }
  for (std::size_t i = n; i-- > 0;) {
    double d_alpha = t_before[i] * (color_well[i] - q_well).dot(d_z_well);
    if (fast) d_alpha += t_before[i] * (color_fast[i] - q_fast).dot(d_z_fast);
    const double d_alpha_d_sigma = samples[i].delta * (1.0 - alpha[i]);
    d_sigma[i] = d_alpha * d_alpha_d_sigma;
    q_well = alpha[i] * color_well[i] + (1.0 - alpha[i]) * q_well;
    if (fast) q_fast = alpha[i] * color_fast[i] + (1.0 - alpha[i]) * q_fast;
  }
}

RenderOutput render_batch(const RadianceField& field, std::span<const double> params,
                          const RayBatch& batch, const RenderOptions& options) {
  batch.validate();
  const std::size_t n_rays = batch.size();
  RenderOutput out;
  out.z_well.assign(n_rays, Vec3::Zero());
  out.z_fast.assign(n_rays, Vec3::Zero());
  out.opacity.assign(n_rays, 0.0);
  out.depth.assign(n_rays, 0.0);

  FieldEvaluator eval(field);
  std::vector<double> sigma(options.n_samples);
  std::vector<Vec3> c_well(options.n_samples), c_fast(options.n_samples);

  for (std::size_t r = 0; r < n_rays; ++r) {
    if (!batch.ray_valid(r)) continue;
    const std::vector<RaySample> samples =
        sample_points(batch.t_near, batch.t_far, options.n_samples, options.stratified,
                      options.seed, options.ray_counter_base + r);
    eval.begin_ray(batch.directions[r], options.n_samples);
    for (int i = 0; i < options.n_samples; ++i) {
      const Vec3 x = batch.origins[r] + samples[i].t * batch.directions[r];
      eval.forward(params, i, x, options.mode);
      sigma[i] = eval.sigma(i);
      c_well[i] = eval.color(i, HeadId::Well);
      if (options.mode == HeadMode::Both) c_fast[i] = eval.color(i, HeadId::Fast);
    }
    const CompositeElement el =
        composite(sigma, samples, c_well,
                  options.mode == HeadMode::Both ? std::span<const Vec3>(c_fast)
                                                 : std::span<const Vec3>());
    out.z_well[r] = el.z_well;
    out.z_fast[r] = el.z_fast;
    out.opacity[r] = el.opacity;
    out.depth[r] = el.depth;
  }
  return out;
}

PanoramaRender render_panorama(const RadianceField& field, std::span<const double> params,
                               const EquirectCamera& cam, int n_samples, int threads,
                               double t_near, double t_far) {
  cam.validate();
  require(n_samples >= 1, "need at least one sample per ray");
  PanoramaRender out{ImageBuffer(cam.width, cam.height, ImageKind::LDR),
                     ImageBuffer(cam.width, cam.height, ImageKind::LDR),
                     ImageBuffer(cam.width, cam.height, ImageKind::LDR)};

  if (t_far <= 0.0) t_far = field.config().bounds.diagonal();
  const auto render_rows = [&](int v_begin, int v_end) {
    FieldEvaluator eval(field);
    std::vector<double> sigma(n_samples);
    std::vector<Vec3> c_well(n_samples), c_fast(n_samples);
    const std::vector<RaySample> samples = sample_points(t_near, t_far, n_samples, false, 0, 0);
    for (int v = v_begin; v < v_end; ++v) {
      for (int u = 0; u < cam.width; ++u) {
        const Ray ray = equirect_ray(cam, u, v);
        eval.begin_ray(ray.direction, n_samples);
        for (int i = 0; i < n_samples; ++i) {
          eval.forward(params, i, ray.origin + samples[i].t * ray.direction, HeadMode::Both);
          sigma[i] = eval.sigma(i);
          c_well[i] = eval.color(i, HeadId::Well);
          c_fast[i] = eval.color(i, HeadId::Fast);
        }
        const CompositeElement el = composite(sigma, samples, c_well, c_fast);
        float* pw = out.well.pixel(u, v);
        float* pf = out.fast.pixel(u, v);
        float* po = out.opacity.pixel(u, v);
        for (int c = 0; c < 3; ++c) {
          pw[c] = static_cast<float>(el.z_well[c]);
          pf[c] = static_cast<float>(el.z_fast[c]);
          po[c] = static_cast<float>(el.opacity);
        }
      }
    }
  };

  if (threads <= 1) {
    render_rows(0, cam.height);
  } else {
    std::vector<std::thread> pool;
    const int rows_per = (cam.height + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int begin = t * rows_per;
      const int end = std::min(cam.height, begin + rows_per);
      if (begin >= end) break;
      pool.emplace_back(render_rows, begin, end);
    }
    for (std::thread& t : pool) t.join();
  }
  return out;
}

}  // namespace hdrf
