// Copyright Contributors to the hdrfield Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

// JSON (de)serialization for configuration structs, shared by the checkpoint
// format, the run-config file, and the CLI.

#include <string>

#include "json.hpp"

#include "core/field.hpp"
#include "core/trainer.hpp"

namespace hdrf {

inline void to_json(nlohmann::json& j, const Box3& b) {
  j = nlohmann::json{{"min", {b.min.x(), b.min.y(), b.min.z()}},
                     {"max", {b.max.x(), b.max.y(), b.max.z()}}};
}

inline void from_json(const nlohmann::json& j, Box3& b) {
  for (int a = 0; a < 3; ++a) {
    b.min[a] = j.at("min").at(a).get<double>();
    b.max[a] = j.at("max").at(a).get<double>();
  }
}

inline void to_json(nlohmann::json& j, const FieldConfig& c) {
  j = nlohmann::json{{"grid_resolutions", c.grid_resolutions},
                     {"features_per_level", c.features_per_level},
                     {"embedding_dim", c.embedding_dim},
                     {"density_hidden", c.density_hidden},
                     {"color_head_hidden", c.color_head_hidden},
                     {"direction_encoding_bands", c.direction_encoding_bands},
                     {"bounds", c.bounds}};
}

inline void from_json(const nlohmann::json& j, FieldConfig& c) {
  c = FieldConfig{};
  if (j.contains("grid_resolutions")) j.at("grid_resolutions").get_to(c.grid_resolutions);
  if (j.contains("features_per_level")) j.at("features_per_level").get_to(c.features_per_level);
  if (j.contains("embedding_dim")) j.at("embedding_dim").get_to(c.embedding_dim);
  if (j.contains("density_hidden")) j.at("density_hidden").get_to(c.density_hidden);
  if (j.contains("color_head_hidden")) j.at("color_head_hidden").get_to(c.color_head_hidden);
  if (j.contains("direction_encoding_bands")) {
    j.at("direction_encoding_bands").get_to(c.direction_encoding_bands);
  }
  if (j.contains("bounds")) j.at("bounds").get_to(c.bounds);
}

inline std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::TwoStage: return "two_stage";
    case TrainMode::OneStep: return "one_step";
    case TrainMode::LinearizeBefore: return "linearize_before";
  }
  return "two_stage";
}

inline TrainMode train_mode_from_string(const std::string& s) {
  if (s == "two_stage") return TrainMode::TwoStage;
  if (s == "one_step") return TrainMode::OneStep;
  if (s == "linearize_before") return TrainMode::LinearizeBefore;
  fail("unknown training mode: " + s + " (expected two_stage, one_step or linearize_before)");
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"iters_stage1", c.iters_stage1},
                     {"iters_stage2", c.iters_stage2},
                     {"batch_rays", c.batch_rays},
                     {"n_samples", c.n_samples},
                     {"n_samples_render", c.n_samples_render},
                     {"lr_grids", c.lr_grids},
                     {"lr_mlp", c.lr_mlp},
                     {"finetune_factor", c.finetune_factor},
                     {"adam_beta1", c.adam_beta1},
                     {"adam_beta2", c.adam_beta2},
                     {"adam_eps", c.adam_eps},
                     {"cosine_decay", c.cosine_decay},
                     {"lr_floor", c.lr_floor},
                     {"mode", to_string(c.mode)},
                     {"seed", c.seed},
                     {"threads", c.threads},
                     {"t_near", c.t_near},
                     {"t_far", c.t_far}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c = TrainConfig{};
  if (j.contains("iters_stage1")) j.at("iters_stage1").get_to(c.iters_stage1);
  if (j.contains("iters_stage2")) j.at("iters_stage2").get_to(c.iters_stage2);
  if (j.contains("batch_rays")) j.at("batch_rays").get_to(c.batch_rays);
  if (j.contains("n_samples")) j.at("n_samples").get_to(c.n_samples);
  if (j.contains("n_samples_render")) j.at("n_samples_render").get_to(c.n_samples_render);
  if (j.contains("lr_grids")) j.at("lr_grids").get_to(c.lr_grids);
  if (j.contains("lr_mlp")) j.at("lr_mlp").get_to(c.lr_mlp);
  if (j.contains("finetune_factor")) j.at("finetune_factor").get_to(c.finetune_factor);
  if (j.contains("adam_beta1")) j.at("adam_beta1").get_to(c.adam_beta1);
  if (j.contains("adam_beta2")) j.at("adam_beta2").get_to(c.adam_beta2);
  if (j.contains("adam_eps")) j.at("adam_eps").get_to(c.adam_eps);
  if (j.contains("cosine_decay")) j.at("cosine_decay").get_to(c.cosine_decay);
  if (j.contains("lr_floor")) j.at("lr_floor").get_to(c.lr_floor);
  if (j.contains("mode")) c.mode = train_mode_from_string(j.at("mode").get<std::string>());
  if (j.contains("seed")) j.at("seed").get_to(c.seed);
  if (j.contains("threads")) j.at("threads").get_to(c.threads);
  if (j.contains("t_near")) j.at("t_near").get_to(c.t_near);
  if (j.contains("t_far")) j.at("t_far").get_to(c.t_far);
}

}  // namespace hdrf
