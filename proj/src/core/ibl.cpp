// Copyright Contributors to the hdrfield Project
// SPDX-License-Identifier: Apache-2.0
#include "core/ibl.hpp"

#include <cmath>

#include "core/geometry.hpp"
#include "core/rng.hpp"

namespace hdrf {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Probe scene, z-up: unit sphere resting on the z=0 plane, camera looking
// down +x at the sphere with the plane filling the lower half of the frame.
const Vec3 kSphereCenter(0.0, 0.0, 1.0);
constexpr double kSphereRadius = 1.0;
const Vec3 kSphereAlbedo(0.75, 0.75, 0.75);
const Vec3 kPlaneAlbedo(0.4, 0.4, 0.4);
const Vec3 kCameraPos(-4.5, 0.0, 1.2);
constexpr double kFovDeg = 40.0;

bool hit_sphere(const Vec3& o, const Vec3& d, double& t) {
  const Vec3 oc = o - kSphereCenter;
  const double b = oc.dot(d);
  const double c = oc.squaredNorm() - kSphereRadius * kSphereRadius;
  const double disc = b * b - c;
  if (disc < 0.0) return false;
  const double s = std::sqrt(disc);
  double root = -b - s;
  if (root <= 1e-9) root = -b + s;
  if (root <= 1e-9) return false;
  t = root;
  return true;
}

bool hit_plane(const Vec3& o, const Vec3& d, double& t) {
  if (std::abs(d.z()) < 1e-12) return false;
  const double root = -o.z() / d.z();
  if (root <= 1e-9) return false;
  t = root;
  return true;
}

Vec3 env_lookup(const ImageBuffer& env, const Vec3& dir) {
  double u = 0.0, v = 0.0;
  equirect_uv_from_local(dir, env.width, env.height, u, v);
  return {env.sample_wrapped(u, v, 0), env.sample_wrapped(u, v, 1),
          env.sample_wrapped(u, v, 2)};
}

/// Cosine-weighted direction about the normal from two uniforms.
Vec3 cosine_sample(const Vec3& normal, double u1, double u2) {
  const double r = std::sqrt(u1);
  const double phi = 2.0 * kPi * u2;
  const double x = r * std::cos(phi);
  const double y = r * std::sin(phi);
  const double z = std::sqrt(std::max(0.0, 1.0 - u1));
  // orthonormal basis around the normal
  const Vec3 a = std::abs(normal.z()) < 0.9 ? Vec3(0, 0, 1) : Vec3(1, 0, 0);
  const Vec3 tangent = a.cross(normal).normalized();
  const Vec3 bitangent = normal.cross(tangent);
  return (x * tangent + y * bitangent + z * normal).normalized();
}

}  // namespace

ImageBuffer render_ibl_probe(const ImageBuffer& envmap, int size, int samples,
                             std::uint64_t seed) {
  require(envmap.kind == ImageKind::HDR, "environment map must be HDR");
  require(envmap.width == 2 * envmap.height, "environment map must be a full panorama");
  require(size > 0 && samples > 0, "probe render needs positive size and sample count");

  ImageBuffer out(size, size, ImageKind::HDR);
  const PerspectiveCamera cam{size, size, kFovDeg, Pose{Quat::identity(), kCameraPos}};

  for (int v = 0; v < size; ++v) {
    for (int u = 0; u < size; ++u) {
      const Ray ray = perspective_ray(cam, u, v);
      double t_sphere = 0.0, t_plane = 0.0;
      const bool s = hit_sphere(ray.origin, ray.direction, t_sphere);
      const bool p = hit_plane(ray.origin, ray.direction, t_plane);

      Vec3 radiance;
      if (!s && !p) {
        radiance = env_lookup(envmap, ray.direction);
      } else {
        const bool sphere_first = s && (!p || t_sphere < t_plane);
        const double t = sphere_first ? t_sphere : t_plane;
        const Vec3 point = ray.origin + t * ray.direction;
        const Vec3 normal =
            sphere_first ? Vec3((point - kSphereCenter).normalized()) : Vec3(0, 0, 1);
        const Vec3 albedo = sphere_first ? kSphereAlbedo : kPlaneAlbedo;

        // E[env * visibility] under cosine-weighted sampling equals the
        // diffuse reflection integral (albedo/π) ∫ L cosθ dω.
        const std::uint64_t pixel_counter =
            static_cast<std::uint64_t>(v) * size + u;
        Vec3 acc = Vec3::Zero();
        for (int k = 0; k < samples; ++k) {
          const double u1 =
              rng_uniform(seed, RngStream::kIblSampling, pixel_counter, 2 * k);
          const double u2 =
              rng_uniform(seed, RngStream::kIblSampling, pixel_counter, 2 * k + 1);
          const Vec3 dir = cosine_sample(normal, u1, u2);
          bool blocked = false;
          if (sphere_first) {
            blocked = dir.z() < 0.0;  // the ground plane blocks everything below
          } else {
            double tb = 0.0;
            blocked = hit_sphere(point + 1e-9 * normal, dir, tb);
          }
          if (!blocked) acc += env_lookup(envmap, dir);
        }
        radiance = albedo.cwiseProduct(acc / samples);
      }
      float* px = out.pixel(u, v);
      for (int c = 0; c < 3; ++c) px[c] = static_cast<float>(std::max(0.0, radiance[c]));
    }
  }
  return out;
}

}  // namespace hdrf
