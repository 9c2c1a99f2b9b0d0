// Copyright Contributors to the hdrfield Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "core/dataset.hpp"
#include "core/geometry.hpp"

namespace hdrf {

// Synthetic ground-truth scenes: an empty axis-aligned room with diffuse
// walls, rectangular emitter patches on the faces, and a constant ambient
// term. Direct lighting only, so every pixel has an exactly reproducible
// reference value.

enum class Face : int { XNeg = 0, XPos, YNeg, YPos, ZNeg, ZPos };

Face face_from_string(const std::string& name);
std::string face_to_string(Face face);
/// Unit normal pointing into the room.
Vec3 face_inward_normal(Face face);

/// Axis-aligned rectangle on a room face. Coordinates are absolute scene
/// units along the face's two tangent axes (the non-fixed axes in ascending
/// order: x- faces use (y,z), y- faces (x,z), z- faces (x,y)).
struct Emitter {
  Face face{Face::ZPos};
  double u0{0}, v0{0}, u1{0}, v1{0};
  Vec3 radiance{Vec3::Zero()};

  double area() const { return (u1 - u0) * (v1 - v0); }
};

struct SynthScene {
  Box3 room;
  std::array<Vec3, 6> albedo;  // indexed by Face
  Vec3 ambient{Vec3::Zero()};
  std::vector<Emitter> emitters;

  void validate() const;
};

SynthScene load_scene(const std::string& path);
void save_scene(const std::string& path, const SynthScene& scene);

/// Exact ray/box reference renderer: emitter radiance on direct hits, else
/// albedo * (ambient + Σ patch irradiance via a fixed 64-point quadrature) / π.
ImageBuffer oracle_render(const SynthScene& scene, const EquirectCamera& cam);
ImageBuffer oracle_render(const SynthScene& scene, const PerspectiveCamera& cam);

/// Irradiance at a point on a face from one emitter (the 8x8 midpoint rule).
Vec3 emitter_irradiance(const Emitter& emitter, const Box3& room, const Vec3& point,
                        const Vec3& receiver_normal);

struct RigOptions {
  RelativePose offset{Quat::from_axis_angle(Vec3(0, 0, 1), 1.5707963267948966),
                      Vec3(0, 0, 0.05)};  // 90° about the monopod axis, 0.05 units up
  double margin{0.15};                    // keep-out fraction of the room extent
};

/// Smooth random walk inside the room; the fast pose of each pair applies
/// the fixed rig offset to the well pose.
std::vector<std::pair<Pose, Pose>> make_rig_trajectory(int n_frames, const Box3& room,
                                                       std::uint64_t seed,
                                                       const RigOptions& rig = {});

struct SynthDatasetOptions {
  int width{128};
  int height{64};
  double fps{15.0};
  double mask_bottom_fraction{0.0};  // simulate a monopod mask on every frame
};

CaptureDataset make_dataset(const SynthScene& scene,
                            const std::vector<std::pair<Pose, Pose>>& trajectory,
                            const ExposureFactor& ef, const Crf& crf,
                            const SynthDatasetOptions& options = {});

std::vector<Pose> make_default_probe_poses(const Box3& room, int count, std::uint64_t seed);

struct ProbeSet {
  std::vector<Pose> poses;
  std::vector<ImageBuffer> hdr;  // ground-truth panoramas
};

ProbeSet render_probes(const SynthScene& scene, const std::vector<Pose>& poses, int width,
                       int height);

/// probes/probes.json + probes/NNN.pfm under the dataset directory.
void write_probes(const std::string& dataset_dir, const ProbeSet& probes);
ProbeSet read_probes(const std::string& dataset_dir);

}  // namespace hdrf
