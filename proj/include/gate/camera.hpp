#pragma once

#include "gate/geometry.hpp"

GATE_NAMESPACE_BEGIN

/// Pinhole camera with a vertical field of view.
struct Camera {
  Vec3 position{0, 0, 1};
  Vec3 look_at{0, 0, 0};
  Vec3 up{0, 1, 0};
  Real vfov_degrees = 45;
  int width = 128;
  int height = 128;

  void validate() const;
  /// Primary ray through the center of pixel (x, y); y = 0 is the top row.
  Ray generate_ray(int x, int y) const;
  bool operator==(const Camera&) const = default;
};

GATE_NAMESPACE_END
