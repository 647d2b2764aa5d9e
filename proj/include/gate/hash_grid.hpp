#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "gate/geometry.hpp"

GATE_NAMESPACE_BEGIN

struct HashGridConfig {
  int levels = 8;
  int features = 4;
  int base_resolution = 2;
  Real growth_factor = 2;
  std::uint32_t table_size = 1u << 14;

  void validate() const;
  /// N_l = floor(base * growth^l).
  int level_resolution(int level) const;
  /// Entries stored for a level: min(T, (N_l + 1)^3).
  std::uint32_t level_entries(int level) const;
  std::size_t parameter_count() const;
  bool operator==(const HashGridConfig&) const = default;
};

inline constexpr std::uint32_t kHashPrime1 = 1u;
inline constexpr std::uint32_t kHashPrime2 = 2654435761u;
inline constexpr std::uint32_t kHashPrime3 = 805459861u;

/// Entry index of an integer lattice corner. Dense addressing when the level
/// fits the table, otherwise the XOR-of-primes spatial hash (uint32 wrap).
std::uint32_t hash_index(const std::array<std::uint32_t, 3>& cell, int resolution,
                         std::uint32_t table_size);

/// Multi-resolution hash-grid encoding with dense Adam state.
struct HashGrid {
  HashGridConfig config;
  std::vector<Real> params;  // entries x F, levels concatenated
  std::vector<Real> adam_m;
  std::vector<Real> adam_v;
  std::uint64_t step = 0;
  std::vector<std::size_t> level_offsets;  // first entry of each level

  std::size_t width() const { return std::size_t(config.levels) * std::size_t(config.features); }
  bool operator==(const HashGrid&) const = default;
};

HashGrid make_hash_grid(const HashGridConfig& config, std::uint64_t seed);

/// The 8 trilinear taps of one level: entry indices (global) and weights.
struct HashGridTaps {
  std::array<std::size_t, 8> entries{};
  std::array<Real, 8> weights{};
};
HashGridTaps hashgrid_taps(const HashGrid& grid, int level, const Vec3& unit_position);

/// Position mapped into [0,1]^3 by the scene bounds and clamped.
Vec3 normalize_to_bounds(const Vec3& position, const Aabb& bounds);

void hashgrid_encode(const HashGrid& grid, const Vec3& position, const Aabb& scene_bounds,
                     std::span<Real> out);
std::vector<Real> hashgrid_encode(const HashGrid& grid, const Vec3& position, const Aabb& scene_bounds);

/// Accumulates trilinear_weight * level slice of dl_dy into `grad`
/// (same shape as grid.params).
void hashgrid_backward(const HashGrid& grid, const Vec3& position, const Aabb& scene_bounds,
                       std::span<const Real> dl_dy, std::span<Real> grad);

/// Table size whose parameter count best matches `target`. Powers of two are
/// preferred; when none lands within +-10% the exact best integer size is
/// returned instead (the modulo hash does not need a power of two).
std::uint32_t match_table_size(HashGridConfig config, std::size_t target_parameters);

GATE_NAMESPACE_END
