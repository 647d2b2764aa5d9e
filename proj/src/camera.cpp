#include "gate/camera.hpp"

GATE_NAMESPACE_BEGIN

void Camera::validate() const {
  if (!(vfov_degrees > 0 && vfov_degrees < 180)) throw GeometryError("camera fov outside (0, 180)");
  if (width < 1 || height < 1) throw GeometryError("camera resolution must be at least 1x1");
  if (!is_finite(position) || !is_finite(look_at) || !is_finite(up)) {
    throw GeometryError("camera has non-finite vectors");
  }
  if (length(look_at - position) <= 0) throw GeometryError("camera look-at equals position");
  if (length(cross(look_at - position, up)) <= 0) throw GeometryError("camera up is parallel to view");
}

Ray Camera::generate_ray(int x, int y) const {
  const Vec3 forward = normalize(look_at - position);
  const Vec3 right = normalize(cross(forward, up));
  const Vec3 true_up = cross(right, forward);
  const Real tan_half = std::tan(vfov_degrees * kPi / 360);
  const Real aspect = Real(width) / Real(height);
  const Real sx = ((Real(x) + Real(0.5)) / Real(width) * 2 - 1) * aspect * tan_half;
  const Real sy = (1 - (Real(y) + Real(0.5)) / Real(height) * 2) * tan_half;
  return {position, normalize(forward + right * sx + true_up * sy), 0,
          std::numeric_limits<Real>::infinity()};
}

GATE_NAMESPACE_END
