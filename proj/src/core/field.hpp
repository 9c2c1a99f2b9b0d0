// Copyright Contributors to the hdrfield Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "core/common.hpp"

namespace hdrf {

// Scene representation: dense multiresolution feature grids feed a small
// trunk MLP that outputs density and a latent embedding; two independent
// color heads (well- and fast-exposed) map (embedding, encoded direction)
// to RGB. Density is shared between the heads, colors are not.

struct FieldConfig {
  std::vector<int> grid_resolutions{16, 32, 64, 128};
  int features_per_level{4};
  int embedding_dim{16};
  int density_hidden{32};
  std::vector<int> color_head_hidden{32, 32};
  int direction_encoding_bands{4};
  Box3 bounds;

  int levels() const { return static_cast<int>(grid_resolutions.size()); }
  int feature_dim() const { return levels() * features_per_level; }
  int encoding_dim() const { return 6 * direction_encoding_bands; }
  int color_input_dim() const { return embedding_dim + encoding_dim; }

  void validate() const;
};

struct TensorSpan {
  std::size_t offset{0};
  std::size_t size{0};
};

/// Offsets of every trainable tensor inside the flat parameter vector.
/// Group order is fixed: [grids | trunk | well head | fast head], so the
/// shared/well/fast partition is three contiguous spans.
struct ParamLayout {
  std::vector<TensorSpan> grids;  // one table per level, res^3 * features
  TensorSpan trunk_w1, trunk_b1;  // feature_dim -> density_hidden
  TensorSpan trunk_w2, trunk_b2;  // density_hidden -> 1 + embedding_dim
  struct Head {
    std::vector<TensorSpan> weights;  // per layer, row-major [out][in]
    std::vector<TensorSpan> biases;
    TensorSpan span;  // whole head
  };
  Head well, fast;
  std::size_t grids_end{0};
  std::size_t total{0};

  static ParamLayout build(const FieldConfig& config);
};

struct ParamPartition {
  TensorSpan shared;  // grids + trunk
  TensorSpan well;
  TensorSpan fast;
};

enum class HeadId : int { Well = 0, Fast = 1 };

enum class HeadMode { WellOnly, Both };

struct DensitySample {
  double sigma{0.0};
  std::vector<double> embedding;
  bool inside{false};
};

class RadianceField;

/// Per-thread scratch space holding the forward tape of one ray's samples.
/// backward() for a slot requires a prior forward() on that slot.
class FieldEvaluator {
public:
  explicit FieldEvaluator(const RadianceField& field);

  /// Computes the direction encoding and invalidates all recorded slots.
  void begin_ray(const Vec3& unit_direction, int n_samples);

  void forward(std::span<const double> params, int slot, const Vec3& x, HeadMode mode);

  double sigma(int slot) const { return meta_[slot].sigma; }
  bool inside(int slot) const { return meta_[slot].inside; }
  Vec3 color(int slot, HeadId head) const;
  std::span<const double> embedding(int slot) const;

  /// Accumulates parameter gradients for one recorded sample. Upstream
  /// gradients are with respect to sigma and the head colors.
  void backward(std::span<const double> params, int slot, HeadMode mode, double d_sigma,
                const Vec3& d_color_well, const Vec3& d_color_fast, std::span<double> grad);

private:
  struct SampleMeta {
    Vec3 x;
    bool inside{false};
    bool recorded{false};
    HeadMode mode{HeadMode::Both};
    double sigma_raw{0.0};
    double sigma{0.0};
  };

  const RadianceField& field_;
  std::vector<double> arena_;
  std::vector<double> encoding_;
  std::vector<SampleMeta> meta_;
  std::vector<double> scratch_;  // backprop temporaries

  friend class RadianceField;
};

class RadianceField {
public:
  explicit RadianceField(FieldConfig config);

  const FieldConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }
  std::size_t parameter_count() const { return layout_.total; }
  ParamPartition partition() const;

  /// Grid features ~ U(-1e-4, 1e-4), MLP weights fan-in-scaled uniform,
  /// biases zero except the density bias (initial sigma ≈ 0.1).
  std::vector<double> init_params(std::uint64_t seed) const;

  /// True for indices belonging to a grid table (they get the grid
  /// learning rate; everything else gets the MLP rate).
  bool is_grid_param(std::size_t index) const { return index < layout_.grids_end; }

  DensitySample eval_density(std::span<const double> params, const Vec3& x) const;
  /// Direction-conditioned color of one head for a given embedding.
  Vec3 eval_color(std::span<const double> params, std::span<const double> embedding,
                  const Vec3& unit_direction, HeadId head) const;

private:
  FieldConfig config_;
  ParamLayout layout_;

  // tape arena offsets (per sample)
  int ofs_feat_, ofs_z1_, ofs_h1_, ofs_tout_, ofs_emb_, ofs_head_in_;
  struct HeadOfs {
    std::vector<int> z, h;  // per hidden layer
    int y;                  // pre-sigmoid output (3)
    int c;                  // sigmoid output (3)
  };
  HeadOfs head_ofs_[2];
  int sample_stride_{0};

  void encode_direction(const Vec3& d, std::span<double> out) const;
  void forward_trunk(std::span<const double> params, const Vec3& x, double* slot,
                     double& sigma_raw, double& sigma, bool& inside) const;
  void forward_head(std::span<const double> params, HeadId head, const double* head_in,
                    double* slot) const;

  friend class FieldEvaluator;
};

}  // namespace hdrf
