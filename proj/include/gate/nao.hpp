#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "gate/bvh.hpp"
#include "gate/camera.hpp"
#include "gate/model.hpp"
#include "gate/training.hpp"

GATE_NAMESPACE_BEGIN

struct Image {
  int width = 0;
  int height = 0;
  std::vector<Rgb> pixels;  // row-major, y = 0 on top

  Image() = default;
  Image(int w, int h, Rgb fill = {0, 0, 0});
  Rgb& at(int x, int y) { return pixels[std::size_t(y) * std::size_t(width) + std::size_t(x)]; }
  const Rgb& at(int x, int y) const { return pixels[std::size_t(y) * std::size_t(width) + std::size_t(x)]; }
  bool operator==(const Image&) const = default;
};

struct AoParams {
  int spp = 16;
  /// Occlusion radius in world units; 0 selects 20% of the scene diagonal.
  Real max_dist = 0;
  int reference_spp = 256;

  void validate() const;
  /// Copy with max_dist resolved against `scene`.
  AoParams resolved(const Scene& scene) const;
  bool operator==(const AoParams&) const = default;
};

/// Self-intersection offset along the normal, relative to the coordinate
/// magnitude of the shading point.
inline constexpr Real kRayOffsetScale = Real(1e-4);

/// kRayOffsetScale x max(|p|_inf, 1e-3 x scene diagonal).
inline Real ray_offset(const Vec3& p, Real scene_diagonal) {
  const Real m = std::max({std::abs(p.x), std::abs(p.y), std::abs(p.z), Real(1e-3) * scene_diagonal});
  return kRayOffsetScale * m;
}

/// Fraction of `spp` cosine-distributed rays over the normal hemisphere that
/// travel max_dist without a hit. 1 means fully open.
Real ao_oracle(const Bvh& bvh, const Vec3& position, const Vec3& normal, int spp, Real max_dist, Pcg32& rng);

/// Oracle callback for training with the online (low spp) budget.
TargetOracle make_ao_oracle(const Bvh& bvh, const AoParams& params);

/// Ground truth with reference_spp rays per pixel; misses are 1.
Image render_reference(const Bvh& bvh, const Camera& camera, const AoParams& params, std::uint64_t seed);

/// One network evaluation per covered pixel, clamped to [0, 1]; misses are 1.
Image render_inference(const Bvh& bvh, const Camera& camera, const Model& model);

/// Colors every covered pixel by the slot with the largest weight at the
/// finest level (ties to the lowest slot id); misses are black.
Image render_voronoi(const Bvh& bvh, const Camera& camera, const FeatureLayout& layout);

/// Deterministic color of a slot id.
Rgb slot_color(std::uint32_t slot);

double mse(const Image& a, const Image& b);
/// 10 log10(1 / mse), capped at 99 dB when mse < 1e-10.
double psnr(const Image& a, const Image& b);
double psnr_from_mse(double mse);

/// Binary PPM (P6), 8 bit, gamma 2.2 encoded.
void write_ppm(const Image& image, const std::filesystem::path& path);
/// Lossless float storage (PFM, little endian, bottom-up rows).
void write_pfm(const Image& image, const std::filesystem::path& path);
Image read_pfm(const std::filesystem::path& path);

GATE_NAMESPACE_END
