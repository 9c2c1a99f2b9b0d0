// Copyright Contributors to the hdrfield Project
// SPDX-License-Identifier: Apache-2.0
#include "core/geometry.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "core/image.hpp"

namespace hdrf {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kDegToRad = kPi / 180.0;
}  // namespace

Quat Quat::from_axis_angle(const Vec3& axis, double radians) {
  const double n = axis.norm();
  require(n > 0.0, "axis-angle rotation needs a nonzero axis");
  const double half = 0.5 * radians;
  const double s = std::sin(half) / n;
  return Quat{std::cos(half), axis.x() * s, axis.y() * s, axis.z() * s};
}

Quat Quat::normalized() const {
  const double n = norm();
  require(n > 0.0, "cannot normalize a zero quaternion");
  return {w / n, x / n, y / n, z / n};
}

Quat Quat::operator*(const Quat& r) const {
  return {w * r.w - x * r.x - y * r.y - z * r.z, w * r.x + x * r.w + y * r.z - z * r.y,
          w * r.y - x * r.z + y * r.w + z * r.x, w * r.z + x * r.y - y * r.x + z * r.w};
}

Vec3 Quat::rotate(const Vec3& v) const {
  // v' = v + 2 q_v × (q_v × v + w v)
  const Vec3 qv(x, y, z);
  const Vec3 t = 2.0 * qv.cross(v);
  return v + w * t + qv.cross(t);
}

double geodesic_angle(const Quat& a, const Quat& b) {
  const double d = std::min(1.0, std::abs(dot(a.normalized(), b.normalized())));
  return 2.0 * std::acos(d);
}

bool same_rotation(const Quat& a, const Quat& b, double tol) {
  return geodesic_angle(a, b) <= tol;
}

Pose Pose::inverse() const {
  const Quat rinv = rotation.conjugate();
  return {rinv, -rinv.rotate(translation)};
}

Pose Pose::compose(const Pose& other) const {
  return {rotation * other.rotation, rotation.rotate(other.translation) + translation};
}

Vec3 average_translations(const std::vector<std::pair<Pose, Pose>>& pairs) {
  require(!pairs.empty(), "no pose pairs");
  Vec3 sum = Vec3::Zero();
  for (const auto& [left, right] : pairs) sum += left.translation - right.translation;
  return sum / static_cast<double>(pairs.size());
}

Quat average_quaternions(const std::vector<std::pair<Quat, Quat>>& pairs) {
  require(!pairs.empty(), "no pose pairs");
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  for (const auto& [left, right] : pairs) {
    const Quat rel = (left.normalized() * right.normalized().conjugate()).normalized();
    const Eigen::Vector4d q(rel.w, rel.x, rel.y, rel.z);
    m += q * q.transpose();  // sign-invariant: (-q)(-q)ᵀ = q qᵀ
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> solver(m);
  require(solver.info() == Eigen::Success, "quaternion averaging eigensolver failed");
  const Eigen::Vector4d evals = solver.eigenvalues();  // ascending
  require(evals(3) - evals(2) > 1e-9 * std::max(evals(3), 1e-300),
          "degenerate rotation set");
  Eigen::Vector4d v = solver.eigenvectors().col(3);
  // Canonical sign: largest-magnitude component positive.
  int arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v(arg) < 0.0) v = -v;
  return Quat{v(0), v(1), v(2), v(3)}.normalized();
}

RelativePose estimate_relative_pose(const std::vector<std::pair<Pose, Pose>>& pairs) {
  std::vector<std::pair<Quat, Quat>> rotations;
  rotations.reserve(pairs.size());
  for (const auto& [left, right] : pairs) rotations.emplace_back(left.rotation, right.rotation);
  return {average_quaternions(rotations), average_translations(pairs)};
}

Pose apply_relative_pose(const Pose& well_pose, const RelativePose& rel) {
  return {(rel.delta_rotation * well_pose.rotation).normalized(),
          well_pose.translation + rel.delta_translation};
}

void EquirectCamera::validate() const {
  require(width > 0 && height > 0, "panorama dimensions must be positive");
  require(width == 2 * height, "panorama must be a full 360x180 image (width == 2*height)");
}

void PerspectiveCamera::validate() const {
  require(width > 0 && height > 0, "perspective dimensions must be positive");
  require(fov_deg > 0.0 && fov_deg < 180.0, "fov must be in (0, 180) degrees");
}

Vec3 equirect_direction_local(double u, double v, int width, int height) {
  const double phi = 2.0 * kPi * ((u + 0.5) / width) - kPi;
  const double theta = kPi * ((v + 0.5) / height);
  const double st = std::sin(theta);
  return {std::cos(phi) * st, std::sin(phi) * st, std::cos(theta)};
}

void equirect_uv_from_local(const Vec3& d, int width, int height, double& u, double& v) {
  const double phi = std::atan2(d.y(), d.x());
  const double theta = std::acos(std::clamp(d.z() / d.norm(), -1.0, 1.0));
  u = (phi + kPi) / (2.0 * kPi) * width - 0.5;
  v = theta / kPi * height - 0.5;
}

Ray equirect_ray(const EquirectCamera& cam, int u, int v) {
  require(u >= 0 && u < cam.width && v >= 0 && v < cam.height, "pixel out of range");
  const Vec3 local = equirect_direction_local(u, v, cam.width, cam.height);
  return {cam.pose.translation, cam.pose.rotation.rotate(local)};
}

namespace {
Vec3 perspective_direction_local(double u, double v, int width, int height, double fov_deg) {
  const double focal = 0.5 * width / std::tan(0.5 * fov_deg * kDegToRad);
  const double uc = u + 0.5 - 0.5 * width;
  const double vc = v + 0.5 - 0.5 * height;
  return Vec3(focal, uc, -vc).normalized();
}
}  // namespace

Ray perspective_ray(const PerspectiveCamera& cam, int u, int v) {
  require(u >= 0 && u < cam.width && v >= 0 && v < cam.height, "pixel out of range");
  const Vec3 local = perspective_direction_local(u, v, cam.width, cam.height, cam.fov_deg);
  return {cam.pose.translation, cam.pose.rotation.rotate(local)};
}

ViewLayout default_view_layout() {
  ViewLayout layout;
  for (int k = 0; k < 8; ++k) layout.emplace_back(45.0 * k, 0.0);
  return layout;
}

Quat view_rotation(double yaw_deg, double pitch_deg) {
  const Quat yaw = Quat::from_axis_angle(Vec3(0, 0, 1), yaw_deg * kDegToRad);
  const Quat pitch = Quat::from_axis_angle(Vec3(0, 1, 0), -pitch_deg * kDegToRad);
  return (yaw * pitch).normalized();
}

std::vector<PerspectiveView> extract_perspective_views(const ImageBuffer& pano,
                                                       const EquirectCamera& cam, double fov_deg,
                                                       int size, const ViewLayout& layout) {
  cam.validate();
  require(pano.width == cam.width && pano.height == cam.height,
          "panorama buffer does not match camera dimensions");
  require(size > 0, "view size must be positive");

  std::vector<PerspectiveView> views;
  views.reserve(layout.size());
  for (const auto& [yaw, pitch] : layout) {
    const Quat local = view_rotation(yaw, pitch);
    PerspectiveCamera view_cam{size, size, fov_deg,
                               Pose{(cam.pose.rotation * local).normalized(),
                                    cam.pose.translation}};
    view_cam.validate();

    ImageBuffer out(size, size, pano.kind);
    if (pano.has_mask()) out.mask.assign(out.pixel_count(), 1);

    for (int v = 0; v < size; ++v) {
      for (int u = 0; u < size; ++u) {
        const Vec3 d_view = perspective_direction_local(u, v, size, size, fov_deg);
        const Vec3 d_pano = local.rotate(d_view);
        double pu = 0.0, pv = 0.0;
        equirect_uv_from_local(d_pano, pano.width, pano.height, pu, pv);
        float* px = out.pixel(u, v);
        for (int c = 0; c < 3; ++c) px[c] = pano.sample_wrapped(pu, pv, c);

        if (pano.has_mask()) {
          // Conservative: invalid if any bilinear source pixel is invalid.
          const double fu = std::floor(pu);
          const double fv = std::floor(pv);
          bool ok = true;
          for (int dv = 0; dv <= 1 && ok; ++dv) {
            for (int du = 0; du <= 1 && ok; ++du) {
              int su = static_cast<int>(fu) + du;
              int sv = std::clamp(static_cast<int>(fv) + dv, 0, pano.height - 1);
              su = ((su % pano.width) + pano.width) % pano.width;
              ok = pano.valid_at(su, sv);
            }
          }
          if (!ok) out.set_valid(u, v, false);
        }
      }
    }
    views.push_back({std::move(out), view_cam});
  }
  return views;
}

}  // namespace hdrf
