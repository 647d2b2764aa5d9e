#include "gate/oneblob.hpp"

#include <stdexcept>

GATE_NAMESPACE_BEGIN

namespace {

// Cumulative mass of the normalized quartic kernel (15/16)(1 - s^2)^2 over
// [-1, s], s in units of the support radius.
double quartic_cdf(double s) {
  if (s <= -1) return 0;
  if (s >= 1) return 1;
  const double s2 = s * s;
  return 0.5 + (15.0 / 16.0) * (s - 2.0 * s * s2 / 3.0 + s2 * s2 * s / 5.0);
}

double kernel_mass(double x, double r, double a, double b) {
  return quartic_cdf((b - x) / r) - quartic_cdf((a - x) / r);
}

void check(int bins, std::size_t size) {
  if (bins < 2) throw std::invalid_argument("one-blob encoding needs at least 2 bins");
  if (size != static_cast<std::size_t>(bins)) throw std::invalid_argument("one-blob: bad output width");
}

}  // namespace

void oneblob_encode(Real x, int bins, std::span<Real> out) {
  check(bins, out.size());
  const double xc = std::clamp(double(x), 0.0, 1.0);
  const double r = 1.0 / bins;
  for (int b = 0; b < bins; ++b) {
    out[b] = static_cast<Real>(kernel_mass(xc, r, b * r, (b + 1) * r));
  }
}

std::vector<Real> oneblob_encode(Real x, int bins) {
  std::vector<Real> out(static_cast<std::size_t>(bins));
  oneblob_encode(x, bins, out);
  return out;
}

void oneblob_encode_periodic(Real x, int bins, std::span<Real> out) {
  check(bins, out.size());
  double xc = double(x) - std::floor(double(x));
  const double r = 1.0 / bins;
  for (int b = 0; b < bins; ++b) {
    const double a = b * r, c = (b + 1) * r;
    // The support (radius r <= 1/2) overlaps at most one neighbouring period.
    const double mass = kernel_mass(xc, r, a, c) + kernel_mass(xc - 1, r, a, c) + kernel_mass(xc + 1, r, a, c);
    out[b] = static_cast<Real>(mass);
  }
}

std::pair<Real, Real> dir_to_spherical(const Vec3& v) {
  const Real theta = std::acos(std::clamp(v.z, Real(-1), Real(1)));
  const Real phi = std::atan2(v.y, v.x);
  return {theta / kPi, phi / (2 * kPi) + Real(0.5)};
}

void encode_direction(const Vec3& v, int bins, std::span<Real> out) {
  const auto [theta, phi] = dir_to_spherical(v);
  oneblob_encode(theta, bins, out.first(static_cast<std::size_t>(bins)));
  oneblob_encode_periodic(phi, bins, out.subspan(static_cast<std::size_t>(bins), static_cast<std::size_t>(bins)));
}

GATE_NAMESPACE_END
