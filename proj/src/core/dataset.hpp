// Copyright Contributors to the hdrfield Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "core/geometry.hpp"
#include "core/image.hpp"

namespace hdrf {

struct CaptureFrame {
  ImageBuffer image;  // LDR
  Pose pose;
};

/// Synchronized well/fast frame pairs plus the calibration constants.
/// Frames are full equirectangular panoramas; the i-th well and fast frames
/// were captured at the same instant by the two rig cameras.
struct CaptureDataset {
  std::vector<CaptureFrame> well_frames;
  std::vector<CaptureFrame> fast_frames;
  ExposureFactor exposure_factor;
  Crf crf;
  Box3 bounds;
  double fps{15.0};

  int width() const { return well_frames.empty() ? 0 : well_frames.front().image.width; }
  int height() const { return well_frames.empty() ? 0 : well_frames.front().image.height; }
  void validate() const;
};

// On-disk layout:
//   meta.json   {"exposure_factor", "gamma", "width", "height", "fps", "bounds"}
//   poses.json  {"frames": [{"id", "camera": "well"|"fast", "q": [w,x,y,z], "t": [x,y,z]}]}
//   well/0000.png, fast/0000.png
//   masks/well_0000.png, masks/fast_0000.png   (only for frames with a mask)

void save_dataset(const std::string& dir, const CaptureDataset& dataset);
CaptureDataset load_dataset(const std::string& dir);

struct PoseRecord {
  std::string id;
  std::string camera;  // "well" | "fast"
  Pose pose;
};

std::vector<PoseRecord> read_poses_json(const std::string& path);
void write_poses_json(const std::string& path, const std::vector<PoseRecord>& records);

/// Pairs well/fast records sharing an id, in file order, for rig estimation.
std::vector<std::pair<Pose, Pose>> pair_pose_records(const std::vector<PoseRecord>& records);

}  // namespace hdrf
