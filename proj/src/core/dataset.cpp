// Copyright Contributors to the hdrfield Project
// SPDX-License-Identifier: Apache-2.0
#include "core/dataset.hpp"

#include <cinttypes>
#include <filesystem>
#include <fstream>
#include <map>

#include "json.hpp"

#include "core/image_io.hpp"

namespace hdrf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string frame_name(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04zu", index);
  return buf;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(path + ": cannot open file");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(path + ": " + e.what());
  }
  return j;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) fail(path + ": cannot open file for writing");
  out << j.dump(2) << "\n";
  if (!out) fail(path + ": write failed");
}

json pose_to_json(const Pose& pose) {
  return json{{"q", {pose.rotation.w, pose.rotation.x, pose.rotation.y, pose.rotation.z}},
              {"t", {pose.translation.x(), pose.translation.y(), pose.translation.z()}}};
}

Pose pose_from_json(const json& j) {
  const auto q = j.at("q");
  const auto t = j.at("t");
  require(q.size() == 4 && t.size() == 3, "pose must have q[4] and t[3]");
  Pose pose;
  pose.rotation = Quat{q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                       q[3].get<double>()}
                      .normalized();
  pose.translation = Vec3(t[0].get<double>(), t[1].get<double>(), t[2].get<double>());
  return pose;
}

}  // namespace

void CaptureDataset::validate() const {
  require(!well_frames.empty(), "dataset has no frames");
  require(well_frames.size() == fast_frames.size(),
          "well/fast frame lists must be index-aligned");
  const int w = well_frames.front().image.width;
  const int h = well_frames.front().image.height;
  for (const auto* frames : {&well_frames, &fast_frames}) {
    for (const CaptureFrame& f : *frames) {
      require(f.image.width == w && f.image.height == h, "all frames must share dimensions");
      require(f.image.kind == ImageKind::LDR, "capture frames must be LDR");
      require(std::abs(f.pose.rotation.norm() - 1.0) <= 1e-9, "frame pose must be unit-norm");
    }
  }
  require(w == 2 * h, "capture frames must be full panoramas");
  require(exposure_factor.factor > 0.0, "exposure factor must be positive");
  require(crf.gamma > 0.0, "gamma must be positive");
  require(!bounds.degenerate(), "dataset bounds must be nondegenerate");
}

void save_dataset(const std::string& dir, const CaptureDataset& dataset) {
  dataset.validate();
  fs::create_directories(fs::path(dir) / "well");
  fs::create_directories(fs::path(dir) / "fast");

  json meta{{"exposure_factor", dataset.exposure_factor.factor},
            {"gamma", dataset.crf.gamma},
            {"width", dataset.width()},
            {"height", dataset.height()},
            {"fps", dataset.fps},
            {"bounds",
             {{"min", {dataset.bounds.min.x(), dataset.bounds.min.y(), dataset.bounds.min.z()}},
              {"max", {dataset.bounds.max.x(), dataset.bounds.max.y(), dataset.bounds.max.z()}}}}};
  write_json_file((fs::path(dir) / "meta.json").string(), meta);

  std::vector<PoseRecord> poses;
  bool any_mask = false;
  for (std::size_t i = 0; i < dataset.well_frames.size(); ++i) {
    const std::string name = frame_name(i);
    poses.push_back({name, "well", dataset.well_frames[i].pose});
    poses.push_back({name, "fast", dataset.fast_frames[i].pose});
    write_png((fs::path(dir) / "well" / (name + ".png")).string(), dataset.well_frames[i].image);
    write_png((fs::path(dir) / "fast" / (name + ".png")).string(), dataset.fast_frames[i].image);
    any_mask = any_mask || dataset.well_frames[i].image.has_mask() ||
               dataset.fast_frames[i].image.has_mask();
  }
  write_poses_json((fs::path(dir) / "poses.json").string(), poses);

  if (any_mask) {
    fs::create_directories(fs::path(dir) / "masks");
    for (std::size_t i = 0; i < dataset.well_frames.size(); ++i) {
      const std::string name = frame_name(i);
      const auto save_mask = [&](const ImageBuffer& img, const std::string& prefix) {
        if (!img.has_mask()) return;
        write_mask_png((fs::path(dir) / "masks" / (prefix + "_" + name + ".png")).string(),
                       img.mask, img.width, img.height);
      };
      save_mask(dataset.well_frames[i].image, "well");
      save_mask(dataset.fast_frames[i].image, "fast");
    }
  }
}

CaptureDataset load_dataset(const std::string& dir) {
  const json meta = load_json_file((fs::path(dir) / "meta.json").string());
  CaptureDataset dataset;
  try {
    dataset.exposure_factor.factor = meta.at("exposure_factor").get<double>();
    dataset.crf.gamma = meta.at("gamma").get<double>();
    dataset.fps = meta.value("fps", 15.0);
    if (meta.contains("bounds")) {
      const auto& b = meta.at("bounds");
      for (int a = 0; a < 3; ++a) {
        dataset.bounds.min[a] = b.at("min")[a].get<double>();
        dataset.bounds.max[a] = b.at("max")[a].get<double>();
      }
    }
  } catch (const json::exception& e) {
    fail(dir + "/meta.json: " + e.what());
  }

  const std::vector<PoseRecord> poses =
      read_poses_json((fs::path(dir) / "poses.json").string());
  std::map<std::string, Pose> well_poses, fast_poses;
  std::vector<std::string> order;
  for (const PoseRecord& r : poses) {
    if (r.camera == "well") {
      if (!well_poses.count(r.id)) order.push_back(r.id);
      well_poses[r.id] = r.pose;
    } else {
      fast_poses[r.id] = r.pose;
    }
  }

  bool have_bounds = meta.contains("bounds");
  Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
  for (const std::string& id : order) {
    require(fast_poses.count(id) > 0, dir + ": missing fast pose for frame " + id);
    CaptureFrame well{read_png((fs::path(dir) / "well" / (id + ".png")).string()),
                      well_poses[id]};
    CaptureFrame fast{read_png((fs::path(dir) / "fast" / (id + ".png")).string()),
                      fast_poses[id]};
    const auto try_mask = [&](CaptureFrame& f, const std::string& prefix) {
      const fs::path p = fs::path(dir) / "masks" / (prefix + "_" + id + ".png");
      if (!fs::exists(p)) return;
      int mw = 0, mh = 0;
      f.image.mask = read_mask_png(p.string(), mw, mh);
      require(mw == f.image.width && mh == f.image.height,
              p.string() + ": mask dimensions mismatch");
    };
    try_mask(well, "well");
    try_mask(fast, "fast");
    lo = lo.cwiseMin(well.pose.translation.cwiseMin(fast.pose.translation));
    hi = hi.cwiseMax(well.pose.translation.cwiseMax(fast.pose.translation));
    dataset.well_frames.push_back(std::move(well));
    dataset.fast_frames.push_back(std::move(fast));
  }
  if (!have_bounds) {
    // Fallback: grow the camera bounding box by a generous margin.
    const Vec3 margin = ((hi - lo).cwiseMax(Vec3::Ones())) * 2.0;
    dataset.bounds = {lo - margin, hi + margin};
  }
  dataset.validate();
  return dataset;
}

std::vector<PoseRecord> read_poses_json(const std::string& path) {
  const json j = load_json_file(path);
  std::vector<PoseRecord> out;
  try {
    for (const json& f : j.at("frames")) {
      PoseRecord r;
      r.id = f.at("id").get<std::string>();
      r.camera = f.at("camera").get<std::string>();
      require(r.camera == "well" || r.camera == "fast",
              path + ": camera must be \"well\" or \"fast\"");
      r.pose = pose_from_json(f);
      out.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    fail(path + ": " + e.what());
  }
  return out;
}

void write_poses_json(const std::string& path, const std::vector<PoseRecord>& records) {
  json frames = json::array();
  for (const PoseRecord& r : records) {
    json f = pose_to_json(r.pose);
    f["id"] = r.id;
    f["camera"] = r.camera;
    frames.push_back(std::move(f));
  }
  write_json_file(path, json{{"frames", std::move(frames)}});
}

std::vector<std::pair<Pose, Pose>> pair_pose_records(const std::vector<PoseRecord>& records) {
  std::map<std::string, std::pair<const Pose*, const Pose*>> by_id;
  std::vector<std::string> order;
  for (const PoseRecord& r : records) {
    auto [it, inserted] = by_id.try_emplace(r.id, nullptr, nullptr);
    if (inserted) order.push_back(r.id);
    (r.camera == "well" ? it->second.first : it->second.second) = &r.pose;
  }
  std::vector<std::pair<Pose, Pose>> pairs;
  for (const std::string& id : order) {
    const auto& [well, fast] = by_id[id];
    if (well != nullptr && fast != nullptr) pairs.emplace_back(*well, *fast);
  }
  require(!pairs.empty(), "no pose pairs");
  return pairs;
}

}  // namespace hdrf
