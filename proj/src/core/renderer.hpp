// Copyright Contributors to the hdrfield Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "core/field.hpp"
#include "core/geometry.hpp"
#include "core/image.hpp"

namespace hdrf {

struct RaySample {
  double t{0.0};
  double delta{0.0};
};

/// n uniform bins on [t_near, t_far]. Unstratified sampling takes bin
/// midpoints with delta equal to the bin width (so Σδ is exact); stratified
/// sampling jitters one point per bin from the counter RNG and closes the
/// last interval at t_far.
std::vector<RaySample> sample_points(double t_near, double t_far, int n_samples, bool stratified,
                                     std::uint64_t seed, std::uint64_t ray_counter);

/// Unit of training/inference work. Targets are optional at inference; the
/// per-ray has_* flags say which head a ray supervises. An unset `valid` bit
/// removes the ray from rendering and loss alike.
struct RayBatch {
  std::vector<Vec3> origins;
  std::vector<Vec3> directions;  // unit
  double t_near{0.0};
  double t_far{1.0};
  std::vector<Vec3> target_well;
  std::vector<Vec3> target_fast;
  std::vector<std::uint8_t> has_well;  // empty = all (when targets present)
  std::vector<std::uint8_t> has_fast;
  std::vector<std::uint8_t> valid;  // empty = all valid

  std::size_t size() const { return origins.size(); }
  bool ray_valid(std::size_t i) const { return valid.empty() || valid[i] != 0; }
  bool ray_has_well(std::size_t i) const {
    return !target_well.empty() && (has_well.empty() || has_well[i] != 0);
  }
  bool ray_has_fast(std::size_t i) const {
    return !target_fast.empty() && (has_fast.empty() || has_fast[i] != 0);
  }
  void validate() const;
};

struct RenderOutput {
  std::vector<Vec3> z_well;
  std::vector<Vec3> z_fast;
  std::vector<double> opacity;
  std::vector<double> depth;
};

struct CompositeElement {
  Vec3 z_well{Vec3::Zero()};
  Vec3 z_fast{Vec3::Zero()};
  double opacity{0.0};
  double depth{0.0};
};

/// Transmittance compositing: α_i = 1 - exp(-σ_i δ_i), w_i = T_i α_i,
/// z = Σ w_i c_i per head; depth = Σ w_i t_i / max(Σ w_i, 1e-6).
CompositeElement composite(std::span<const double> sigma, std::span<const RaySample> samples,
                           std::span<const Vec3> color_well, std::span<const Vec3> color_fast);

/// Gradients of the composited pixel values with respect to per-sample
/// densities and colors. d_z_* are upstream gradients at the output.
void composite_backward(std::span<const double> sigma, std::span<const RaySample> samples,
                        std::span<const Vec3> color_well, std::span<const Vec3> color_fast,
                        const Vec3& d_z_well, const Vec3& d_z_fast,
                        std::span<double> d_sigma, std::span<Vec3> d_color_well,
                        std::span<Vec3> d_color_fast);

struct RenderOptions {
  int n_samples{96};
  bool stratified{false};
  std::uint64_t seed{0};
  std::uint64_t ray_counter_base{0};  // jitter key of ray i is base + i
  HeadMode mode{HeadMode::Both};
};

RenderOutput render_batch(const RadianceField& field, std::span<const double> params,
                          const RayBatch& batch, const RenderOptions& options);

struct PanoramaRender {
  ImageBuffer well;
  ImageBuffer fast;
  ImageBuffer opacity;  // single value replicated per channel, LDR kind
};

/// Deterministic (unstratified) rendering of every pixel of the panorama.
/// t_far <= 0 means "bounds diagonal".
PanoramaRender render_panorama(const RadianceField& field, std::span<const double> params,
                               const EquirectCamera& cam, int n_samples, int threads = 1,
                               double t_near = 1e-3, double t_far = 0.0);

}  // namespace hdrf
