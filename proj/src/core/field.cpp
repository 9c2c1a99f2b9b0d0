// Copyright Contributors to the hdrfield Project
// SPDX-License-Identifier: Apache-2.0
#include "core/field.hpp"

#include <algorithm>
#include <cmath>

#include "core/rng.hpp"

namespace hdrf {

namespace {

// Hidden activation is a shifted softplus (zero at zero), so a zero-bias
// network is exactly neutral at initialization and everything stays smooth
// for finite-difference checks.
constexpr double kLn2 = 0.6931471805599453;

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double softplus_shifted(double x) { return softplus(x) - kLn2; }
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline void linear_forward(const double* w, const double* b, const double* x, int in, int out,
                           double* y) {
  for (int o = 0; o < out; ++o) {
    const double* row = w + static_cast<std::size_t>(o) * in;
    double acc = b[o];
    for (int i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

inline void linear_backward(const double* w, const double* x, const double* dy, int in, int out,
                            double* dw, double* db, double* dx) {
  for (int o = 0; o < out; ++o) {
    const double g = dy[o];
    db[o] += g;
    const double* row = w + static_cast<std::size_t>(o) * in;
    double* drow = dw + static_cast<std::size_t>(o) * in;
    for (int i = 0; i < in; ++i) drow[i] += g * x[i];
    if (dx != nullptr) {
      for (int i = 0; i < in; ++i) dx[i] += g * row[i];
    }
  }
}

struct CellWeights {
  int i0[3];
  double f[3];
};

inline CellWeights cell_weights(const Vec3& xn, int res) {
  CellWeights cw;
  for (int a = 0; a < 3; ++a) {
    const double pos = xn[a] * (res - 1);
    int i = static_cast<int>(std::floor(pos));
    i = std::clamp(i, 0, res - 2);
    cw.i0[a] = i;
    cw.f[a] = pos - i;
  }
  return cw;
}

}  // namespace

void FieldConfig::validate() const {
  require(!grid_resolutions.empty(), "field needs at least one grid level");
  for (int r : grid_resolutions) require(r >= 2, "grid resolution must be >= 2");
  require(features_per_level >= 1, "features_per_level must be positive");
  require(embedding_dim >= 1, "embedding_dim must be positive");
  require(density_hidden >= 1, "density_hidden must be positive");
  require(!color_head_hidden.empty(), "color head needs at least one hidden layer");
  for (int h : color_head_hidden) require(h >= 1, "color head width must be positive");
  require(direction_encoding_bands >= 1, "direction_encoding_bands must be positive");
  require(!bounds.degenerate(), "field bounds must be nondegenerate");
}

ParamLayout ParamLayout::build(const FieldConfig& config) {
  ParamLayout layout;
  std::size_t at = 0;
  const auto take = [&at](std::size_t n) {
    TensorSpan s{at, n};
    at += n;
    return s;
  };

  for (int r : config.grid_resolutions) {
    layout.grids.push_back(take(static_cast<std::size_t>(r) * r * r * config.features_per_level));
  }
  layout.grids_end = at;

  const int feat = config.feature_dim();
  const int dh = config.density_hidden;
  const int trunk_out = 1 + config.embedding_dim;
  layout.trunk_w1 = take(static_cast<std::size_t>(dh) * feat);
  layout.trunk_b1 = take(dh);
  layout.trunk_w2 = take(static_cast<std::size_t>(trunk_out) * dh);
  layout.trunk_b2 = take(trunk_out);

  const auto build_head = [&](Head& head) {
    const std::size_t begin = at;
    int in = config.color_input_dim();
    std::vector<int> outs = config.color_head_hidden;
    outs.push_back(3);
    for (int out : outs) {
      head.weights.push_back(take(static_cast<std::size_t>(out) * in));
      head.biases.push_back(take(out));
      in = out;
    }
    head.span = {begin, at - begin};
  };
  build_head(layout.well);
  build_head(layout.fast);
  layout.total = at;
  return layout;
}

RadianceField::RadianceField(FieldConfig config) : config_(std::move(config)) {
  config_.validate();
  layout_ = ParamLayout::build(config_);

  int at = 0;
  const auto take = [&at](int n) {
    const int o = at;
    at += n;
    return o;
  };
  ofs_feat_ = take(config_.feature_dim());
  ofs_z1_ = take(config_.density_hidden);
  ofs_h1_ = take(config_.density_hidden);
  ofs_tout_ = take(1 + config_.embedding_dim);
  ofs_emb_ = take(config_.embedding_dim);
  ofs_head_in_ = take(config_.color_input_dim());
  for (HeadOfs& h : head_ofs_) {
    for (int width : config_.color_head_hidden) {
      h.z.push_back(take(width));
      h.h.push_back(take(width));
    }
    h.y = take(3);
    h.c = take(3);
  }
  sample_stride_ = at;
}

ParamPartition RadianceField::partition() const {
  const std::size_t shared = layout_.well.span.offset;
  return {{0, shared},
          {layout_.well.span.offset, layout_.well.span.size},
          {layout_.fast.span.offset, layout_.fast.span.size}};
}

std::vector<double> RadianceField::init_params(std::uint64_t seed) const {
  std::vector<double> params(layout_.total, 0.0);
  for (std::size_t i = 0; i < layout_.grids_end; ++i) {
    params[i] = rng_uniform(seed, RngStream::kGridInit, i, 0, -1e-4, 1e-4);
  }
  const auto init_weights = [&](const TensorSpan& span, int fan_in) {
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < span.size; ++i) {
      params[span.offset + i] =
          rng_uniform(seed, RngStream::kWeightInit, span.offset + i, 0, -s, s);
    }
  };
  init_weights(layout_.trunk_w1, config_.feature_dim());
  init_weights(layout_.trunk_w2, config_.density_hidden);
  for (const ParamLayout::Head* head : {&layout_.well, &layout_.fast}) {
    int in = config_.color_input_dim();
    for (std::size_t li = 0; li < head->weights.size(); ++li) {
      init_weights(head->weights[li], in);
      in = static_cast<int>(head->biases[li].size);
    }
  }
  // Density bias: softplus(b) ≈ 0.1 so rays start nearly transparent.
  params[layout_.trunk_b2.offset] = -2.25216846104409;
  return params;
}

void RadianceField::encode_direction(const Vec3& d, std::span<double> out) const {
  int k = 0;
  double freq = 1.0;
  for (int band = 0; band < config_.direction_encoding_bands; ++band) {
    for (int a = 0; a < 3; ++a) {
      out[k++] = std::sin(freq * d[a]);
      out[k++] = std::cos(freq * d[a]);
    }
    freq *= 2.0;
  }
}

void RadianceField::forward_trunk(std::span<const double> params, const Vec3& x, double* slot,
                                  double& sigma_raw, double& sigma, bool& inside) const {
  const Box3& b = config_.bounds;
  inside = b.contains(x);
  double* feat = slot + ofs_feat_;
  double* emb = slot + ofs_emb_;
  if (!inside) {
    sigma_raw = 0.0;
    sigma = 0.0;
    std::fill(emb, emb + config_.embedding_dim, 0.0);
    return;
  }
  const Vec3 xn = (x - b.min).cwiseQuotient(b.extent());

  const int fpl = config_.features_per_level;
  for (int l = 0; l < config_.levels(); ++l) {
    const int res = config_.grid_resolutions[l];
    const double* table = params.data() + layout_.grids[l].offset;
    const CellWeights cw = cell_weights(xn, res);
    double* out = feat + static_cast<std::size_t>(l) * fpl;
    std::fill(out, out + fpl, 0.0);
    for (int cx = 0; cx <= 1; ++cx) {
      const double wx = cx ? cw.f[0] : 1.0 - cw.f[0];
      for (int cy = 0; cy <= 1; ++cy) {
        const double wxy = wx * (cy ? cw.f[1] : 1.0 - cw.f[1]);
        for (int cz = 0; cz <= 1; ++cz) {
          const double w = wxy * (cz ? cw.f[2] : 1.0 - cw.f[2]);
          const std::size_t base =
              ((static_cast<std::size_t>(cw.i0[0] + cx) * res + (cw.i0[1] + cy)) * res +
               (cw.i0[2] + cz)) *
              fpl;
          for (int f = 0; f < fpl; ++f) out[f] += w * table[base + f];
        }
      }
    }
  }

  const int dh = config_.density_hidden;
  const int trunk_out = 1 + config_.embedding_dim;
  double* z1 = slot + ofs_z1_;
  double* h1 = slot + ofs_h1_;
  linear_forward(params.data() + layout_.trunk_w1.offset, params.data() + layout_.trunk_b1.offset,
                 feat, config_.feature_dim(), dh, z1);
  for (int i = 0; i < dh; ++i) h1[i] = softplus_shifted(z1[i]);

  // trunk output: [sigma_raw, embedding...]
  double* tout = slot + ofs_tout_;
  linear_forward(params.data() + layout_.trunk_w2.offset, params.data() + layout_.trunk_b2.offset,
                 h1, dh, trunk_out, tout);
  sigma_raw = tout[0];
  sigma = softplus(sigma_raw);
  std::copy(tout + 1, tout + trunk_out, emb);
}

void RadianceField::forward_head(std::span<const double> params, HeadId head,
                                 const double* head_in, double* slot) const {
  const ParamLayout::Head& hl = head == HeadId::Well ? layout_.well : layout_.fast;
  const HeadOfs& ho = head_ofs_[static_cast<int>(head)];
  const double* in = head_in;
  int in_dim = config_.color_input_dim();
  for (std::size_t li = 0; li < ho.z.size(); ++li) {
    const int width = static_cast<int>(hl.biases[li].size);
    double* z = slot + ho.z[li];
    double* h = slot + ho.h[li];
    linear_forward(params.data() + hl.weights[li].offset, params.data() + hl.biases[li].offset,
                   in, in_dim, width, z);
    for (int i = 0; i < width; ++i) h[i] = softplus_shifted(z[i]);
    in = h;
    in_dim = width;
  }
  double* y = slot + ho.y;
  double* c = slot + ho.c;
  const std::size_t last = hl.weights.size() - 1;
  linear_forward(params.data() + hl.weights[last].offset, params.data() + hl.biases[last].offset,
                 in, in_dim, 3, y);
  for (int i = 0; i < 3; ++i) c[i] = sigmoid(y[i]);
}

DensitySample RadianceField::eval_density(std::span<const double> params, const Vec3& x) const {
  require(params.size() == layout_.total, "parameter vector size mismatch");
  std::vector<double> slot(sample_stride_, 0.0);
  DensitySample out;
  out.embedding.resize(config_.embedding_dim);
  double sigma_raw = 0.0;
  forward_trunk(params, x, slot.data(), sigma_raw, out.sigma, out.inside);
  std::copy(slot.begin() + ofs_emb_, slot.begin() + ofs_emb_ + config_.embedding_dim,
            out.embedding.begin());
  return out;
}

Vec3 RadianceField::eval_color(std::span<const double> params, std::span<const double> embedding,
                               const Vec3& unit_direction, HeadId head) const {
  require(params.size() == layout_.total, "parameter vector size mismatch");
  require(embedding.size() == static_cast<std::size_t>(config_.embedding_dim),
          "embedding size mismatch");
  std::vector<double> slot(sample_stride_, 0.0);
  std::vector<double> enc(config_.encoding_dim());
  encode_direction(unit_direction, enc);
  double* head_in = slot.data() + ofs_head_in_;
  std::copy(embedding.begin(), embedding.end(), head_in);
  std::copy(enc.begin(), enc.end(), head_in + config_.embedding_dim);
  forward_head(params, head, head_in, slot.data());
  const double* c = slot.data() + head_ofs_[static_cast<int>(head)].c;
  return {c[0], c[1], c[2]};
}

FieldEvaluator::FieldEvaluator(const RadianceField& field) : field_(field) {
  encoding_.resize(field.config().encoding_dim());
  const int max_width =
      std::max({field.config().feature_dim(), field.config().density_hidden,
                field.config().color_input_dim(), 1 + field.config().embedding_dim,
                *std::max_element(field.config().color_head_hidden.begin(),
                                  field.config().color_head_hidden.end()),
                3});
  scratch_.resize(static_cast<std::size_t>(max_width) * 4);
}

void FieldEvaluator::begin_ray(const Vec3& unit_direction, int n_samples) {
  field_.encode_direction(unit_direction, encoding_);
  if (static_cast<int>(meta_.size()) < n_samples) {
    meta_.resize(n_samples);
    arena_.resize(static_cast<std::size_t>(n_samples) * field_.sample_stride_);
  }
  for (int i = 0; i < n_samples; ++i) meta_[i].recorded = false;
}

void FieldEvaluator::forward(std::span<const double> params, int slot, const Vec3& x,
                             HeadMode mode) {
  SampleMeta& m = meta_[slot];
  m.x = x;
  m.mode = mode;
  m.recorded = true;
  double* s = arena_.data() + static_cast<std::size_t>(slot) * field_.sample_stride_;
  field_.forward_trunk(params, x, s, m.sigma_raw, m.sigma, m.inside);
  if (!m.inside) return;
  const FieldConfig& cfg = field_.config();
  double* head_in = s + field_.ofs_head_in_;
  std::copy(s + field_.ofs_emb_, s + field_.ofs_emb_ + cfg.embedding_dim, head_in);
  std::copy(encoding_.begin(), encoding_.end(), head_in + cfg.embedding_dim);
  field_.forward_head(params, HeadId::Well, head_in, s);
  if (mode == HeadMode::Both) field_.forward_head(params, HeadId::Fast, head_in, s);
}

Vec3 FieldEvaluator::color(int slot, HeadId head) const {
  const SampleMeta& m = meta_[slot];
  if (!m.inside) return Vec3::Zero();
  const double* c = arena_.data() + static_cast<std::size_t>(slot) * field_.sample_stride_ +
                    field_.head_ofs_[static_cast<int>(head)].c;
  return {c[0], c[1], c[2]};
}

std::span<const double> FieldEvaluator::embedding(int slot) const {
  return {arena_.data() + static_cast<std::size_t>(slot) * field_.sample_stride_ +
              field_.ofs_emb_,
          static_cast<std::size_t>(field_.config().embedding_dim)};
}

void FieldEvaluator::backward(std::span<const double> params, int slot, HeadMode mode,
                              double d_sigma, const Vec3& d_color_well, const Vec3& d_color_fast,
                              std::span<double> grad) {
  require(slot >= 0 && slot < static_cast<int>(meta_.size()) && meta_[slot].recorded,
          "backward without a matching forward pass");
  const SampleMeta& m = meta_[slot];
  if (!m.inside) return;

  const FieldConfig& cfg = field_.config();
  const ParamLayout& layout = field_.layout_;
  double* s = arena_.data() + static_cast<std::size_t>(slot) * field_.sample_stride_;
  const double* head_in = s + field_.ofs_head_in_;

  const int in_dim0 = cfg.color_input_dim();
  double* d_head_in = scratch_.data();
  double* d_a = scratch_.data() + scratch_.size() / 4;
  double* d_b = scratch_.data() + scratch_.size() / 2;
  std::fill(d_head_in, d_head_in + in_dim0, 0.0);

  const auto head_backward = [&](HeadId id, const Vec3& d_color) {
    if (d_color.isZero(0.0)) return;
    const ParamLayout::Head& hl = id == HeadId::Well ? layout.well : layout.fast;
    const RadianceField::HeadOfs& ho = field_.head_ofs_[static_cast<int>(id)];
    const std::size_t n_layers = hl.weights.size();

    // output layer: c = sigmoid(y)
    const double* c = s + ho.c;
    double* cur = d_a;
    double* nxt = d_b;
    for (int i = 0; i < 3; ++i) cur[i] = d_color[i] * c[i] * (1.0 - c[i]);

    for (std::size_t li = n_layers; li-- > 0;) {
      const int out = static_cast<int>(hl.biases[li].size);
      const int in = li == 0 ? in_dim0 : static_cast<int>(hl.biases[li - 1].size);
      const double* x = li == 0 ? head_in : s + ho.h[li - 1];
      if (li == 0) {
        linear_backward(params.data() + hl.weights[li].offset, x, cur, in, out,
                        grad.data() + hl.weights[li].offset, grad.data() + hl.biases[li].offset,
                        d_head_in);
      } else {
        std::fill(nxt, nxt + in, 0.0);
        linear_backward(params.data() + hl.weights[li].offset, x, cur, in, out,
                        grad.data() + hl.weights[li].offset, grad.data() + hl.biases[li].offset,
                        nxt);
        // through the shifted-softplus activation of layer li-1
        const double* z = s + ho.z[li - 1];
        for (int i = 0; i < in; ++i) nxt[i] *= sigmoid(z[i]);
        std::swap(cur, nxt);
      }
    }
  };

  head_backward(HeadId::Well, d_color_well);
  if (mode == HeadMode::Both && m.mode == HeadMode::Both) {
    head_backward(HeadId::Fast, d_color_fast);
  }

  // trunk: out = [sigma_raw, embedding]; sigma = softplus(sigma_raw)
  const int dh = cfg.density_hidden;
  const int trunk_out = 1 + cfg.embedding_dim;
  double* d_out = d_a;
  d_out[0] = d_sigma * sigmoid(m.sigma_raw);
  for (int i = 0; i < cfg.embedding_dim; ++i) d_out[1 + i] = d_head_in[i];

  const double* h1 = s + field_.ofs_h1_;
  double* d_h1 = d_b;
  std::fill(d_h1, d_h1 + dh, 0.0);
  linear_backward(params.data() + layout.trunk_w2.offset, h1, d_out, dh, trunk_out,
                  grad.data() + layout.trunk_w2.offset, grad.data() + layout.trunk_b2.offset,
                  d_h1);
  const double* z1 = s + field_.ofs_z1_;
  for (int i = 0; i < dh; ++i) d_h1[i] *= sigmoid(z1[i]);

  const double* feat = s + field_.ofs_feat_;
  double* d_feat = scratch_.data() + 3 * (scratch_.size() / 4);
  std::fill(d_feat, d_feat + cfg.feature_dim(), 0.0);
  linear_backward(params.data() + layout.trunk_w1.offset, feat, d_h1, cfg.feature_dim(), dh,
                  grad.data() + layout.trunk_w1.offset, grad.data() + layout.trunk_b1.offset,
                  d_feat);

  // scatter into the grids with the trilinear weights
  const Box3& b = cfg.bounds;
  const Vec3 xn = (m.x - b.min).cwiseQuotient(b.extent());
  const int fpl = cfg.features_per_level;
  for (int l = 0; l < cfg.levels(); ++l) {
    const int res = cfg.grid_resolutions[l];
    double* gtable = grad.data() + layout.grids[l].offset;
    const CellWeights cw = cell_weights(xn, res);
    const double* df = d_feat + static_cast<std::size_t>(l) * fpl;
    for (int cx = 0; cx <= 1; ++cx) {
      const double wx = cx ? cw.f[0] : 1.0 - cw.f[0];
      for (int cy = 0; cy <= 1; ++cy) {
        const double wxy = wx * (cy ? cw.f[1] : 1.0 - cw.f[1]);
        for (int cz = 0; cz <= 1; ++cz) {
          const double w = wxy * (cz ? cw.f[2] : 1.0 - cw.f[2]);
          const std::size_t base =
              ((static_cast<std::size_t>(cw.i0[0] + cx) * res + (cw.i0[1] + cy)) * res +
               (cw.i0[2] + cz)) *
              fpl;
          for (int f = 0; f < fpl; ++f) gtable[base + f] += w * df[f];
        }
      }
    }
  }
}

}  // namespace hdrf
