#pragma once

#include <span>
#include <utility>
#include <vector>

#include "gate/math.hpp"

GATE_NAMESPACE_BEGIN

// One-blob encoding with a quartic kernel of support radius 1/k: bin b holds
// the kernel mass falling into [b/k, (b+1)/k].

inline constexpr int kDefaultOneBlobBins = 4;

/// Mass outside [0, 1] is dropped.
void oneblob_encode(Real x, int bins, std::span<Real> out);
std::vector<Real> oneblob_encode(Real x, int bins);

/// Periodic variant for angles: mass leaving one end re-enters at the other.
void oneblob_encode_periodic(Real x, int bins, std::span<Real> out);

/// (theta / pi, phi / 2pi + 0.5) of a unit vector.
std::pair<Real, Real> dir_to_spherical(const Vec3& v);

/// Polar angle truncated, azimuth periodic; writes 2 * bins values.
void encode_direction(const Vec3& v, int bins, std::span<Real> out);

GATE_NAMESPACE_END
