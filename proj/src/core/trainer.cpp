// Copyright Contributors to the hdrfield Project
// SPDX-License-Identifier: Apache-2.0
#include "core/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>

#include "core/config_json.hpp"
#include "core/rng.hpp"

namespace hdrf {

namespace {

constexpr char kCheckpointMagic[8] = {'H', 'D', 'R', 'F', 'C', 'K', 'P', '1'};

// idx 0 = shared, 1 = well, 2 = fast
struct GroupPlan {
  bool active[3];
  double mult[3];
};

GroupPlan group_plan(TrainMode mode, int stage, double finetune_factor) {
  if (mode == TrainMode::OneStep) return {{true, true, true}, {1.0, 1.0, 1.0}};
  if (stage == 1) return {{true, true, false}, {1.0, 1.0, 1.0}};
  return {{true, true, true}, {finetune_factor, finetune_factor, 1.0}};
}

struct PixelRef {
  std::uint32_t frame;
  std::uint16_t u, v;
  std::uint8_t camera;  // 0 = well, 1 = fast
};

struct PixelPools {
  std::vector<PixelRef> well_only;
  std::vector<PixelRef> combined;  // well then fast
};

PixelPools build_pools(const CaptureDataset& dataset) {
  PixelPools pools;
  const auto scan = [&](const std::vector<CaptureFrame>& frames, std::uint8_t camera,
                        std::vector<PixelRef>& out) {
    for (std::uint32_t fi = 0; fi < frames.size(); ++fi) {
      const ImageBuffer& img = frames[fi].image;
      for (int v = 0; v < img.height; ++v) {
        for (int u = 0; u < img.width; ++u) {
          if (img.valid_at(u, v)) {
            out.push_back({fi, static_cast<std::uint16_t>(u), static_cast<std::uint16_t>(v),
                           camera});
          }
        }
      }
    }
  };
  scan(dataset.well_frames, 0, pools.well_only);
  pools.combined = pools.well_only;
  scan(dataset.fast_frames, 1, pools.combined);
  require(!pools.well_only.empty(), "dataset has no valid well-exposed pixels");
  return pools;
}

double effective_t_far(const TrainConfig& config, const Box3& bounds) {
  return config.t_far > 0.0 ? config.t_far : bounds.diagonal();
}

RayBatch assemble_batch(const CaptureDataset& dataset, const std::vector<PixelRef>& pool,
                        const TrainConfig& config, const Box3& bounds, long long iteration) {
  RayBatch batch;
  const int n = config.batch_rays;
  batch.origins.resize(n);
  batch.directions.resize(n);
  batch.target_well.assign(n, Vec3::Zero());
  batch.target_fast.assign(n, Vec3::Zero());
  batch.has_well.assign(n, 0);
  batch.has_fast.assign(n, 0);
  batch.t_near = config.t_near;
  batch.t_far = effective_t_far(config, bounds);

  const int width = dataset.width();
  const int height = dataset.height();
  for (int k = 0; k < n; ++k) {
    const std::uint64_t pick =
        rng_index(config.seed, RngStream::kRayDraw, static_cast<std::uint64_t>(iteration), k,
                  pool.size());
    const PixelRef ref = pool[pick];
    const CaptureFrame& frame = ref.camera == 0 ? dataset.well_frames[ref.frame]
                                                : dataset.fast_frames[ref.frame];
    const EquirectCamera cam{width, height, frame.pose};
    const Ray ray = equirect_ray(cam, ref.u, ref.v);
    batch.origins[k] = ray.origin;
    batch.directions[k] = ray.direction.normalized();
    const float* px = frame.image.pixel(ref.u, ref.v);
    const Vec3 target(px[0], px[1], px[2]);
    if (ref.camera == 0) {
      batch.target_well[k] = target;
      batch.has_well[k] = 1;
    } else {
      batch.target_fast[k] = target;
      batch.has_fast[k] = 1;
    }
  }
  return batch;
}

inline double cosine_scale(const TrainConfig& config, long long iteration, int stage) {
  if (!config.cosine_decay) return 1.0;
  double progress = 0.0;
  if (config.mode == TrainMode::OneStep) {
    progress = static_cast<double>(iteration) / std::max(1, config.total_iterations());
  } else if (stage == 1) {
    progress = static_cast<double>(iteration) / std::max(1, config.iters_stage1);
  } else {
    progress =
        static_cast<double>(iteration - config.iters_stage1) / std::max(1, config.iters_stage2);
  }
  constexpr double kPi = 3.14159265358979323846;
  return config.lr_floor + (1.0 - config.lr_floor) * 0.5 * (1.0 + std::cos(kPi * progress));
}

void adam_step(TrainState& state, const RadianceField& field, std::span<const double> grad,
               const GroupPlan& plan, double lr_scale) {
  const TrainConfig& c = state.train_config;
  const ParamPartition part = field.partition();
  const TensorSpan spans[3] = {part.shared, part.well, part.fast};
  for (int g = 0; g < 3; ++g) {
    if (!plan.active[g]) continue;
    ++state.group_steps[g];
    const double bc1 = 1.0 - std::pow(c.adam_beta1, static_cast<double>(state.group_steps[g]));
    const double bc2 = 1.0 - std::pow(c.adam_beta2, static_cast<double>(state.group_steps[g]));
    const std::size_t begin = spans[g].offset;
    const std::size_t end = begin + spans[g].size;
    for (std::size_t i = begin; i < end; ++i) {
      const double gi = grad[i];
      double& m = state.adam_m[i];
      double& v = state.adam_v[i];
      m = c.adam_beta1 * m + (1.0 - c.adam_beta1) * gi;
      v = c.adam_beta2 * v + (1.0 - c.adam_beta2) * gi * gi;
      const double lr =
          (field.is_grid_param(i) ? c.lr_grids : c.lr_mlp) * plan.mult[g] * lr_scale;
      state.params[i] -= lr * (m / bc1) / (std::sqrt(v / bc2) + c.adam_eps);
    }
  }
}

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& in, const std::string& path) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) fail(path + ": truncated checkpoint");
  return v;
}

void write_doubles(std::ostream& out, const std::vector<double>& v) {
  write_u64(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::istream& in, const std::string& path) {
  const std::uint64_t n = read_u64(in, path);
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) fail(path + ": truncated checkpoint");
  return v;
}

}  // namespace

void TrainConfig::validate() const {
  require(iters_stage1 >= 0 && iters_stage2 >= 0, "iteration counts must be nonnegative");
  require(total_iterations() > 0, "training needs a positive iteration budget");
  require(batch_rays > 0, "batch_rays must be positive");
  require(n_samples >= 1 && n_samples_render >= 1, "sample counts must be positive");
  require(lr_grids > 0.0 && lr_mlp > 0.0, "learning rates must be positive");
  require(finetune_factor > 0.0, "finetune factor must be positive");
  require(threads >= 1, "threads must be >= 1");
  require(t_near > 0.0, "t_near must be positive");
}

int stage_of_iteration(const TrainConfig& config, long long it) {
  if (config.mode == TrainMode::OneStep) return 1;
  return it < config.iters_stage1 ? 1 : 2;
}

PhotometricLoss photometric_loss(const RenderOutput& pred, const RayBatch& batch, LossHeads which,
                                 const Crf* linear_space) {
  batch.validate();
  const std::size_t n = batch.size();
  require(pred.z_well.size() == n, "prediction/batch size mismatch");
  const bool use_well = which != LossHeads::Fast;
  const bool use_fast = which != LossHeads::Well;
  const double gamma = linear_space != nullptr ? linear_space->gamma : 1.0;
  const bool transform = linear_space != nullptr && gamma != 1.0;

  std::size_t n_well = 0, n_fast = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (!batch.ray_valid(r)) continue;
    if (use_well && batch.ray_has_well(r)) n_well += 3;
    if (use_fast && batch.ray_has_fast(r)) n_fast += 3;
  }
  require(n_well + n_fast > 0, "empty batch");

  PhotometricLoss out;
  out.element_count = n_well + n_fast;
  out.d_z_well.assign(n, Vec3::Zero());
  out.d_z_fast.assign(n, Vec3::Zero());
  const double inv_count = 1.0 / static_cast<double>(out.element_count);

  double sum_well = 0.0, sum_fast = 0.0;
  const auto term = [&](double z, double t, double& d) {
    if (!transform) {
      const double diff = z - t;
      d = 2.0 * diff * inv_count;
      return diff * diff;
    }
    const double zc = std::max(z, 1e-12);
    const double diff = std::pow(zc, gamma) - std::pow(std::max(t, 0.0), gamma);
    d = 2.0 * diff * gamma * std::pow(zc, gamma - 1.0) * inv_count;
    return diff * diff;
  };
  for (std::size_t r = 0; r < n; ++r) {
    if (!batch.ray_valid(r)) continue;
    if (use_well && batch.ray_has_well(r)) {
      for (int c = 0; c < 3; ++c) {
        double d = 0.0;
        sum_well += term(pred.z_well[r][c], batch.target_well[r][c], d);
        out.d_z_well[r][c] = d;
      }
    }
    if (use_fast && batch.ray_has_fast(r)) {
      require(pred.z_fast.size() == n, "prediction lacks fast-head values");
      for (int c = 0; c < 3; ++c) {
        double d = 0.0;
        sum_fast += term(pred.z_fast[r][c], batch.target_fast[r][c], d);
        out.d_z_fast[r][c] = d;
      }
    }
  }
  out.loss = (sum_well + sum_fast) * inv_count;
  out.loss_well = n_well > 0 ? sum_well / static_cast<double>(n_well) : 0.0;
  out.loss_fast = n_fast > 0 ? sum_fast / static_cast<double>(n_fast) : 0.0;
  return out;
}

LossGradResult loss_and_gradients(const RadianceField& field, std::span<const double> params,
                                  const RayBatch& batch, const LossGradOptions& options,
                                  std::span<double> grad) {
  batch.validate();
  require(grad.size() == field.parameter_count(), "gradient buffer size mismatch");
  const std::size_t n_rays = batch.size();
  const bool use_well = options.which != LossHeads::Fast;
  const bool use_fast = options.which != LossHeads::Well;
  const HeadMode hmode = use_fast ? HeadMode::Both : HeadMode::WellOnly;
  const double gamma = options.linear_space != nullptr ? options.linear_space->gamma : 1.0;
  const bool transform = options.linear_space != nullptr && gamma != 1.0;

  std::size_t n_well = 0, n_fast = 0;
  for (std::size_t r = 0; r < n_rays; ++r) {
    if (!batch.ray_valid(r)) continue;
    if (use_well && batch.ray_has_well(r)) n_well += 3;
    if (use_fast && batch.ray_has_fast(r)) n_fast += 3;
  }
  require(n_well + n_fast > 0, "empty batch");
  const double inv_count = 1.0 / static_cast<double>(n_well + n_fast);

  struct PartialSums {
    double well{0.0};
    double fast{0.0};
  };

  const int n = options.n_samples;
  const auto worker = [&](std::size_t begin, std::size_t end, std::span<double> gbuf,
                          PartialSums& sums) {
    FieldEvaluator eval(field);
    std::vector<double> sigma(n), d_sigma(n);
    std::vector<Vec3> c_well(n), c_fast(n), d_c_well(n), d_c_fast(n);
    const auto term = [&](double z, double t, double& d) {
      if (!transform) {
        const double diff = z - t;
        d = 2.0 * diff * inv_count;
        return diff * diff;
      }
      const double zc = std::max(z, 1e-12);
      const double diff = std::pow(zc, gamma) - std::pow(std::max(t, 0.0), gamma);
      d = 2.0 * diff * gamma * std::pow(zc, gamma - 1.0) * inv_count;
      return diff * diff;
    };

    for (std::size_t r = begin; r < end; ++r) {
      if (!batch.ray_valid(r)) continue;
      const bool ray_well = use_well && batch.ray_has_well(r);
      const bool ray_fast = use_fast && batch.ray_has_fast(r);
      if (!ray_well && !ray_fast) continue;

      const std::vector<RaySample> samples =
          sample_points(batch.t_near, batch.t_far, n, options.stratified, options.seed,
                        options.ray_counter_base + r);
      eval.begin_ray(batch.directions[r], n);
      for (int i = 0; i < n; ++i) {
        const Vec3 x = batch.origins[r] + samples[i].t * batch.directions[r];
        eval.forward(params, i, x, hmode);
        sigma[i] = eval.sigma(i);
        c_well[i] = eval.color(i, HeadId::Well);
        if (use_fast) c_fast[i] = eval.color(i, HeadId::Fast);
      }
      const std::span<const Vec3> fast_span =
          use_fast ? std::span<const Vec3>(c_fast.data(), n) : std::span<const Vec3>();
      const CompositeElement el =
          composite({sigma.data(), static_cast<std::size_t>(n)},
                    {samples.data(), static_cast<std::size_t>(n)},
                    {c_well.data(), static_cast<std::size_t>(n)}, fast_span);

      Vec3 d_z_well = Vec3::Zero(), d_z_fast = Vec3::Zero();
      if (ray_well) {
        for (int c = 0; c < 3; ++c) {
          double d = 0.0;
          sums.well += term(el.z_well[c], batch.target_well[r][c], d);
          d_z_well[c] = d;
        }
      }
      if (ray_fast) {
        for (int c = 0; c < 3; ++c) {
          double d = 0.0;
          sums.fast += term(el.z_fast[c], batch.target_fast[r][c], d);
          d_z_fast[c] = d;
        }
      }

      composite_backward({sigma.data(), static_cast<std::size_t>(n)},
                         {samples.data(), static_cast<std::size_t>(n)},
                         {c_well.data(), static_cast<std::size_t>(n)}, fast_span, d_z_well,
                         d_z_fast, d_sigma, d_c_well, d_c_fast);
      for (int i = 0; i < n; ++i) {
        eval.backward(params, i, hmode, d_sigma[i], d_c_well[i],
                      use_fast ? d_c_fast[i] : Vec3::Zero(), gbuf);
      }
    }
  };

  PartialSums totals;
  const int threads = std::max(1, options.threads);
  if (threads == 1 || n_rays < 2) {
    worker(0, n_rays, grad, totals);
  } else {
    // Per-thread gradient buffers reduced in thread order keep results
    // bit-reproducible for a fixed thread count.
    const std::size_t per = (n_rays + threads - 1) / threads;
    std::vector<std::vector<double>> buffers;
    std::vector<PartialSums> sums(threads);
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      buffers.emplace_back(field.parameter_count(), 0.0);
    }
    for (int t = 0; t < threads; ++t) {
      const std::size_t begin = static_cast<std::size_t>(t) * per;
      const std::size_t end = std::min(n_rays, begin + per);
      if (begin >= end) break;
      pool.emplace_back(worker, begin, end, std::span<double>(buffers[t]), std::ref(sums[t]));
    }
    for (std::thread& t : pool) t.join();
    for (int t = 0; t < threads; ++t) {
      const std::vector<double>& buf = buffers[t];
      for (std::size_t i = 0; i < buf.size(); ++i) grad[i] += buf[i];
      totals.well += sums[t].well;
      totals.fast += sums[t].fast;
    }
  }

  LossGradResult result;
  result.loss = (totals.well + totals.fast) * inv_count;
  result.loss_well = n_well > 0 ? totals.well / static_cast<double>(n_well) : 0.0;
  result.loss_fast = n_fast > 0 ? totals.fast / static_cast<double>(n_fast) : 0.0;
  return result;
}

TrainState init_training(const CaptureDataset& dataset, const FieldConfig& field_config,
                         const TrainConfig& train_config) {
  dataset.validate();
  train_config.validate();
  FieldConfig fc = field_config;
  if (fc.bounds.degenerate()) fc.bounds = dataset.bounds;
  fc.validate();

  TrainState state;
  state.field_config = fc;
  state.train_config = train_config;
  state.crf = dataset.crf;
  state.exposure_factor = dataset.exposure_factor;

  const RadianceField field(fc);
  state.params = field.init_params(train_config.seed);
  state.adam_m.assign(state.params.size(), 0.0);
  state.adam_v.assign(state.params.size(), 0.0);
  return state;
}

void train_steps(TrainState& state, const CaptureDataset& dataset, long long max_iterations,
                 std::vector<TrainLogRow>* log, const TrainProgressFn& progress) {
  dataset.validate();
  const TrainConfig& config = state.train_config;
  config.validate();
  const RadianceField field(state.field_config);
  require(state.params.size() == field.parameter_count(),
          "state parameter count does not match the field configuration");

  const PixelPools pools = build_pools(dataset);
  const long long end_iteration =
      std::min<long long>(config.total_iterations(), state.iteration + max_iterations);
  std::vector<double> grad(field.parameter_count(), 0.0);

  while (state.iteration < end_iteration) {
    const auto t0 = std::chrono::steady_clock::now();
    const long long it = state.iteration;
    const int stage = stage_of_iteration(config, it);
    const bool stage_one_of_two =
        config.mode != TrainMode::OneStep && stage == 1;

    const std::vector<PixelRef>& pool = stage_one_of_two ? pools.well_only : pools.combined;
    const RayBatch batch = assemble_batch(dataset, pool, config, state.field_config.bounds, it);

    LossGradOptions opts;
    opts.n_samples = config.n_samples;
    opts.stratified = true;
    opts.seed = config.seed;
    opts.ray_counter_base = static_cast<std::uint64_t>(it) * config.batch_rays;
    opts.which = stage_one_of_two ? LossHeads::Well : LossHeads::Both;
    opts.linear_space = config.mode == TrainMode::LinearizeBefore ? &state.crf : nullptr;
    opts.threads = config.threads;

    std::fill(grad.begin(), grad.end(), 0.0);
    const LossGradResult res = loss_and_gradients(field, state.params, batch, opts, grad);
    if (!std::isfinite(res.loss)) {
      fail("training diverged at iteration " + std::to_string(it) +
           ": loss is not finite (lr_grids=" + std::to_string(config.lr_grids) +
           ", lr_mlp=" + std::to_string(config.lr_mlp) + ")");
    }

    adam_step(state, field, grad, group_plan(config.mode, stage, config.finetune_factor),
              cosine_scale(config, it, stage));
    ++state.iteration;

    const auto t1 = std::chrono::steady_clock::now();
    if (log != nullptr) {
      log->push_back({it, stage, res.loss_well, res.loss_fast,
                      std::chrono::duration<double, std::milli>(t1 - t0).count()});
    }
    if (progress) progress(it, stage, res.loss_well, res.loss_fast);
  }
}

TrainState train(const CaptureDataset& dataset, const FieldConfig& field_config,
                 const TrainConfig& train_config, std::vector<TrainLogRow>* log,
                 const TrainProgressFn& progress) {
  TrainState state = init_training(dataset, field_config, train_config);
  train_steps(state, dataset, train_config.total_iterations(), log, progress);
  return state;
}

void checkpoint_save(const std::string& path, const TrainState& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path + ": cannot open file for writing");
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));

  nlohmann::json meta{{"version", 1},
                      {"field_config", state.field_config},
                      {"train_config", state.train_config},
                      {"gamma", state.crf.gamma},
                      {"exposure_factor", state.exposure_factor.factor},
                      {"iteration", state.iteration},
                      {"group_steps", {state.group_steps[0], state.group_steps[1],
                                       state.group_steps[2]}}};
  const std::string js = meta.dump();
  write_u64(out, js.size());
  out.write(js.data(), static_cast<std::streamsize>(js.size()));
  write_doubles(out, state.params);
  write_doubles(out, state.adam_m);
  write_doubles(out, state.adam_v);
  if (!out) fail(path + ": write failed");
}

TrainState checkpoint_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path + ": cannot open file");
  char magic[8] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, 7) != 0) {
    fail(path + ": not an hdrfield checkpoint");
  }
  if (magic[7] != kCheckpointMagic[7]) fail(path + ": unsupported checkpoint version");

  const std::uint64_t js_len = read_u64(in, path);
  std::string js(js_len, '\0');
  in.read(js.data(), static_cast<std::streamsize>(js_len));
  if (!in) fail(path + ": truncated checkpoint");

  TrainState state;
  try {
    const nlohmann::json meta = nlohmann::json::parse(js);
    require(meta.at("version").get<int>() == 1, path + ": unsupported checkpoint version");
    meta.at("field_config").get_to(state.field_config);
    meta.at("train_config").get_to(state.train_config);
    state.crf.gamma = meta.at("gamma").get<double>();
    state.exposure_factor.factor = meta.at("exposure_factor").get<double>();
    state.iteration = meta.at("iteration").get<long long>();
    for (int g = 0; g < 3; ++g) state.group_steps[g] = meta.at("group_steps").at(g).get<long long>();
  } catch (const nlohmann::json::exception& e) {
    fail(path + ": corrupt checkpoint metadata: " + e.what());
  }
  state.params = read_doubles(in, path);
  state.adam_m = read_doubles(in, path);
  state.adam_v = read_doubles(in, path);

  const RadianceField field(state.field_config);
  require(state.params.size() == field.parameter_count() &&
              state.adam_m.size() == state.params.size() &&
              state.adam_v.size() == state.params.size(),
          path + ": checkpoint parameter count mismatch");
  return state;
}

void write_train_log_csv(const std::string& path, const std::vector<TrainLogRow>& log) {
  std::ofstream out(path);
  if (!out) fail(path + ": cannot open file for writing");
  out << "iteration,stage,loss_well,loss_fast,wall_ms\n";
  char buf[160];
  for (const TrainLogRow& row : log) {
    std::snprintf(buf, sizeof(buf), "%lld,%d,%.12g,%.12g,%.3f\n", row.iteration, row.stage,
                  row.loss_well, row.loss_fast, row.wall_ms);
    out << buf;
  }
  if (!out) fail(path + ": write failed");
}

MergeResult recover_hdr_panorama(const RadianceField& field, std::span<const double> params,
                                 const EquirectCamera& cam, const Crf& crf,
                                 const ExposureFactor& ef, int n_samples, int threads,
                                 double t_near, double t_far) {
  const PanoramaRender render = render_panorama(field, params, cam, n_samples, threads, t_near,
                                                t_far);
  const ImageBuffer p_well = linearize(render.well, crf);
  const ImageBuffer p_fast = linearize(render.fast, crf);
  return merge_hdr(p_well, p_fast, ef);
}

}  // namespace hdrf
