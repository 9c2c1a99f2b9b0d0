// Copyright Contributors to the hdrfield Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "core/renderer.hpp"

namespace hdrf {

enum class TrainMode {
  TwoStage,         // stage 1: shared+well on well targets; stage 2: all, both targets
  OneStep,          // all groups on both targets for the whole budget
  LinearizeBefore,  // two-stage schedule, loss computed after the inverse CRF
};

struct TrainConfig {
  int iters_stage1{30000};
  int iters_stage2{30000};
  int batch_rays{4096};
  int n_samples{96};          // stratified, training
  int n_samples_render{192};  // uniform, inference
  double lr_grids{1e-2};
  double lr_mlp{1e-3};
  double finetune_factor{0.1};  // stage-2 multiplier on shared and well groups
  double adam_beta1{0.9};
  double adam_beta2{0.999};
  double adam_eps{1e-15};
  bool cosine_decay{true};
  double lr_floor{0.1};  // cosine decays to lr * lr_floor
  TrainMode mode{TrainMode::TwoStage};
  std::uint64_t seed{0};
  int threads{1};
  double t_near{1e-3};
  double t_far{0.0};  // 0 = dataset bounds diagonal

  int total_iterations() const { return iters_stage1 + iters_stage2; }
  void validate() const;
};

enum class LossHeads { Well, Fast, Both };

struct PhotometricLoss {
  double loss{0.0};
  double loss_well{0.0};
  double loss_fast{0.0};
  std::size_t element_count{0};
  std::vector<Vec3> d_z_well;  // gradients with respect to the predictions
  std::vector<Vec3> d_z_fast;
};

/// Mean squared error over valid rays and selected heads, per scalar channel,
/// in nonlinear pixel space. When linear_space is non-null, predictions and
/// targets first pass through the inverse CRF and the loss lives in linear
/// space. Throws "empty batch" when nothing contributes.
PhotometricLoss photometric_loss(const RenderOutput& pred, const RayBatch& batch, LossHeads which,
                                 const Crf* linear_space = nullptr);

struct LossGradOptions {
  int n_samples{96};
  bool stratified{true};
  std::uint64_t seed{0};
  std::uint64_t ray_counter_base{0};
  LossHeads which{LossHeads::Both};
  const Crf* linear_space{nullptr};
  int threads{1};
};

struct LossGradResult {
  double loss{0.0};
  double loss_well{0.0};
  double loss_fast{0.0};
};

/// Fused render + loss + reverse pass; accumulates parameter gradients into
/// `grad` (caller zeroes). Thread partition is by contiguous ray blocks and
/// per-thread buffers are reduced in thread order, so results are
/// bit-reproducible for a fixed thread count.
LossGradResult loss_and_gradients(const RadianceField& field, std::span<const double> params,
                                  const RayBatch& batch, const LossGradOptions& options,
                                  std::span<double> grad);

struct TrainLogRow {
  long long iteration{0};
  int stage{0};
  double loss_well{0.0};
  double loss_fast{0.0};
  double wall_ms{0.0};
};

/// Everything needed to continue training bit-exactly: parameters, Adam
/// moments, per-group step counts and the position in the ray stream (which
/// is just the iteration number, the RNG being counter-based).
struct TrainState {
  FieldConfig field_config;
  TrainConfig train_config;
  Crf crf;
  ExposureFactor exposure_factor;
  long long iteration{0};
  long long group_steps[3]{0, 0, 0};  // shared, well, fast
  std::vector<double> params;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
};

using TrainProgressFn =
    std::function<void(long long iteration, int stage, double loss_well, double loss_fast)>;

TrainState init_training(const CaptureDataset& dataset, const FieldConfig& field_config,
                         const TrainConfig& train_config);

/// Runs up to `max_iterations` more iterations (capped at the configured
/// total). Appends one row per iteration to `log` when given.
void train_steps(TrainState& state, const CaptureDataset& dataset, long long max_iterations,
                 std::vector<TrainLogRow>* log = nullptr,
                 const TrainProgressFn& progress = nullptr);

/// Full run: init_training + all configured iterations.
TrainState train(const CaptureDataset& dataset, const FieldConfig& field_config,
                 const TrainConfig& train_config, std::vector<TrainLogRow>* log = nullptr,
                 const TrainProgressFn& progress = nullptr);

/// Stage governing iteration `it` (1-based semantics: stage 1 then stage 2).
int stage_of_iteration(const TrainConfig& config, long long it);

void checkpoint_save(const std::string& path, const TrainState& state);
TrainState checkpoint_load(const std::string& path);

void write_train_log_csv(const std::string& path, const std::vector<TrainLogRow>& log);

/// Renders both heads at the camera, linearizes with the inverse CRF and
/// fuses into an HDR panorama plus hole mask.
MergeResult recover_hdr_panorama(const RadianceField& field, std::span<const double> params,
                                 const EquirectCamera& cam, const Crf& crf,
                                 const ExposureFactor& ef, int n_samples, int threads = 1,
                                 double t_near = 1e-3, double t_far = 0.0);

}  // namespace hdrf
