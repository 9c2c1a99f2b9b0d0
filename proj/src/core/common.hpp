// Copyright Contributors to the hdrfield Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace hdrf {

using Vec3 = Eigen::Vector3d;

/// Error type thrown by all core operations. The C API boundary converts
/// these into status codes plus a message.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

[[noreturn]] inline void fail(const std::string& message) { throw Error(message); }

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(message);
}

/// Axis-aligned box in scene units.
struct Box3 {
  Vec3 min{Vec3::Zero()};
  Vec3 max{Vec3::Ones()};

  Vec3 extent() const { return max - min; }
  Vec3 center() const { return 0.5 * (min + max); }
  double diagonal() const { return extent().norm(); }

  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }

  bool degenerate() const { return (extent().array() <= 0.0).any(); }
};

}  // namespace hdrf
