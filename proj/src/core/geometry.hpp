// Copyright Contributors to the hdrfield Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>
#include <vector>

#include "core/common.hpp"

namespace hdrf {

struct ImageBuffer;

/// Unit quaternion (w, x, y, z). q and -q denote the same rotation.
struct Quat {
  double w{1.0}, x{0.0}, y{0.0}, z{0.0};

  static Quat identity() { return {}; }
  static Quat from_axis_angle(const Vec3& axis, double radians);

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
  Quat normalized() const;
  Quat conjugate() const { return {w, -x, -y, -z}; }

  /// Hamilton product: this ∘ rhs applies rhs first, then this.
  Quat operator*(const Quat& rhs) const;
  Vec3 rotate(const Vec3& v) const;
};

inline double dot(const Quat& a, const Quat& b) {
  return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
}

/// Rotation-level distance in radians, invariant to quaternion sign.
double geodesic_angle(const Quat& a, const Quat& b);

/// Equality as rotations: q and -q compare equal.
bool same_rotation(const Quat& a, const Quat& b, double tol = 1e-9);

/// Camera-to-world rigid transform.
struct Pose {
  Quat rotation;
  Vec3 translation{Vec3::Zero()};

  static Pose identity() { return {}; }

  Vec3 apply(const Vec3& local) const { return rotation.rotate(local) + translation; }
  Pose inverse() const;
  /// Composition: (*this) ∘ other, i.e. other is applied first.
  Pose compose(const Pose& other) const;
};

/// Rigid offset between the two cameras of the capture rig.
struct RelativePose {
  Quat delta_rotation;
  Vec3 delta_translation{Vec3::Zero()};
};

/// Mean of per-pair world-frame translation differences t_left - t_right.
Vec3 average_translations(const std::vector<std::pair<Pose, Pose>>& pairs);

/// Average of per-pair relative rotations q_left ⊗ q_right⁻¹, computed as the
/// dominant eigenvector of the 4x4 accumulation matrix M = Σ q qᵀ.
/// Throws on an empty list and on a degenerate set (tied dominant eigenvalues).
Quat average_quaternions(const std::vector<std::pair<Quat, Quat>>& pairs);

RelativePose estimate_relative_pose(const std::vector<std::pair<Pose, Pose>>& pairs);

/// Pose of the fast camera given the well camera's pose and the rig offset.
Pose apply_relative_pose(const Pose& well_pose, const RelativePose& rel);

/// Full 360x180 panorama camera. width must equal 2*height.
struct EquirectCamera {
  int width{0};
  int height{0};
  Pose pose;

  void validate() const;
};

/// Pinhole camera, principal point at the image center, square pixels.
struct PerspectiveCamera {
  int width{0};
  int height{0};
  double fov_deg{90.0};  // horizontal
  Pose pose;

  void validate() const;
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit
};

// Local camera frame convention: forward +x, right +y (φ increasing), up +z.
// Pixel centers carry a +0.5 offset so a full panorama covers the sphere exactly.

/// Direction in the camera's local frame for continuous panorama coordinates.
Vec3 equirect_direction_local(double u, double v, int width, int height);
/// Inverse of equirect_direction_local: continuous (u, v) for a local direction.
void equirect_uv_from_local(const Vec3& local_dir, int width, int height, double& u, double& v);

Ray equirect_ray(const EquirectCamera& cam, int u, int v);
Ray perspective_ray(const PerspectiveCamera& cam, int u, int v);

/// One (yaw, pitch) pair per view, degrees. Yaw about local +z, pitch tilts up.
using ViewLayout = std::vector<std::pair<double, double>>;

/// Eight yaws at 45° increments, pitch 0.
ViewLayout default_view_layout();

/// Rotation taking the camera's local frame to the (yaw, pitch) view frame.
Quat view_rotation(double yaw_deg, double pitch_deg);

struct PerspectiveView {
  ImageBuffer image;
  PerspectiveCamera camera;
};

/// Bilinear resampling of a panorama into perspective crops. Masks are
/// combined conservatively: an output pixel is invalid if any contributing
/// source pixel is invalid.
std::vector<PerspectiveView> extract_perspective_views(const ImageBuffer& pano,
                                                       const EquirectCamera& cam, double fov_deg,
                                                       int size, const ViewLayout& layout);

}  // namespace hdrf
