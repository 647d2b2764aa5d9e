#include "gate/hash_grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

GATE_NAMESPACE_BEGIN

void HashGridConfig::validate() const {
  if (levels < 1 || levels > 16) throw std::invalid_argument("hash grid levels must be in [1, 16]");
  if (features < 1 || features > 8) throw std::invalid_argument("hash grid features must be in [1, 8]");
  if (base_resolution < 1) throw std::invalid_argument("hash grid base resolution must be >= 1");
  if (!(growth_factor >= 1)) throw std::invalid_argument("hash grid growth factor must be >= 1");
  if (table_size < 1) throw std::invalid_argument("hash grid table size must be >= 1");
  if (level_resolution(levels - 1) > (1 << 20)) throw std::invalid_argument("hash grid resolution too large");
}

int HashGridConfig::level_resolution(int level) const {
  return static_cast<int>(std::floor(double(base_resolution) * std::pow(double(growth_factor), level)));
}

std::uint32_t HashGridConfig::level_entries(int level) const {
  const auto n1 = static_cast<std::uint64_t>(level_resolution(level)) + 1;
  const std::uint64_t dense = n1 * n1 * n1;
  return static_cast<std::uint32_t>(std::min<std::uint64_t>(dense, table_size));
}

std::size_t HashGridConfig::parameter_count() const {
  std::size_t total = 0;
  for (int l = 0; l < levels; ++l) total += std::size_t(level_entries(l)) * std::size_t(features);
  return total;
}

std::uint32_t hash_index(const std::array<std::uint32_t, 3>& cell, int resolution,
                         std::uint32_t table_size) {
  const auto n1 = static_cast<std::uint64_t>(resolution) + 1;
  if (n1 * n1 * n1 <= table_size) {
    return static_cast<std::uint32_t>(cell[0] + cell[1] * n1 + cell[2] * n1 * n1);
  }
  const std::uint32_t h = (cell[0] * kHashPrime1) ^ (cell[1] * kHashPrime2) ^ (cell[2] * kHashPrime3);
  return h % table_size;
}

HashGrid make_hash_grid(const HashGridConfig& config, std::uint64_t seed) {
  config.validate();
  HashGrid grid;
  grid.config = config;
  std::size_t entries = 0;
  for (int l = 0; l < config.levels; ++l) {
    grid.level_offsets.push_back(entries);
    entries += config.level_entries(l);
  }
  const std::size_t n = entries * std::size_t(config.features);
  grid.params.resize(n);
  grid.adam_m.assign(n, 0);
  grid.adam_v.assign(n, 0);
  Pcg32 rng(derive_seed(seed, 0x68617368677269ULL));
  for (Real& v : grid.params) v = rng.uniform(Real(-1e-4), Real(1e-4));
  return grid;
}

Vec3 normalize_to_bounds(const Vec3& position, const Aabb& bounds) {
  Vec3 out;
  for (int a = 0; a < 3; ++a) {
    const Real extent = bounds.hi[a] - bounds.lo[a];
    const Real t = extent > 0 ? (position[a] - bounds.lo[a]) / extent : Real(0.5);
    out[a] = std::clamp(t, Real(0), Real(1));
  }
  return out;
}

HashGridTaps hashgrid_taps(const HashGrid& grid, int level, const Vec3& unit_position) {
  const int n = grid.config.level_resolution(level);
  std::array<std::uint32_t, 3> cell{};
  std::array<Real, 3> frac{};
  for (int a = 0; a < 3; ++a) {
    const Real p = unit_position[a] * Real(n);
    const int c = std::clamp(static_cast<int>(std::floor(p)), 0, n - 1);
    cell[a] = static_cast<std::uint32_t>(c);
    frac[a] = std::clamp(p - Real(c), Real(0), Real(1));
  }
  HashGridTaps taps;
  for (int corner = 0; corner < 8; ++corner) {
    Real w = 1;
    std::array<std::uint32_t, 3> c = cell;
    for (int a = 0; a < 3; ++a) {
      const bool upper = (corner >> a) & 1;
      c[a] += upper ? 1u : 0u;
      w *= upper ? frac[a] : 1 - frac[a];
    }
    taps.entries[corner] = grid.level_offsets[level] + hash_index(c, n, grid.config.table_size);
    taps.weights[corner] = w;
  }
  return taps;
}

void hashgrid_encode(const HashGrid& grid, const Vec3& position, const Aabb& scene_bounds,
                     std::span<Real> out) {
  if (out.size() != grid.width()) throw std::invalid_argument("hashgrid_encode: bad output width");
  const Vec3 unit = normalize_to_bounds(position, scene_bounds);
  const auto f_count = static_cast<std::size_t>(grid.config.features);
  for (int l = 0; l < grid.config.levels; ++l) {
    const HashGridTaps taps = hashgrid_taps(grid, l, unit);
    Real* z = out.data() + std::size_t(l) * f_count;
    for (std::size_t f = 0; f < f_count; ++f) z[f] = 0;
    for (int c = 0; c < 8; ++c) {
      const Real* src = grid.params.data() + taps.entries[c] * f_count;
      for (std::size_t f = 0; f < f_count; ++f) z[f] += taps.weights[c] * src[f];
    }
  }
}

std::vector<Real> hashgrid_encode(const HashGrid& grid, const Vec3& position, const Aabb& scene_bounds) {
  std::vector<Real> out(grid.width());
  hashgrid_encode(grid, position, scene_bounds, out);
  return out;
}

void hashgrid_backward(const HashGrid& grid, const Vec3& position, const Aabb& scene_bounds,
                       std::span<const Real> dl_dy, std::span<Real> grad) {
  if (dl_dy.size() != grid.width()) throw std::invalid_argument("hashgrid_backward: bad gradient width");
  if (grad.size() != grid.params.size()) throw std::invalid_argument("hashgrid_backward: bad buffer size");
  const Vec3 unit = normalize_to_bounds(position, scene_bounds);
  const auto f_count = static_cast<std::size_t>(grid.config.features);
  for (int l = 0; l < grid.config.levels; ++l) {
    const HashGridTaps taps = hashgrid_taps(grid, l, unit);
    const Real* slice = dl_dy.data() + std::size_t(l) * f_count;
    for (int c = 0; c < 8; ++c) {
      Real* dst = grad.data() + taps.entries[c] * f_count;
      for (std::size_t f = 0; f < f_count; ++f) dst[f] += taps.weights[c] * slice[f];
    }
  }
}

std::uint32_t match_table_size(HashGridConfig config, std::size_t target_parameters) {
  const double target = double(target_parameters);
  std::uint32_t best = 1;
  double best_err = std::numeric_limits<double>::max();
  for (int bits = 0; bits <= 30; ++bits) {
    config.table_size = 1u << bits;
    const double err = std::abs(double(config.parameter_count()) - target);
    if (err < best_err) {
      best_err = err;
      best = config.table_size;
    }
  }
  if (best_err <= 0.1 * target) return best;

  // Parameter count is monotone in T: bisect for the closest integer size.
  std::uint32_t lo = 1, hi = 1u << 30;
  while (lo < hi) {
    const std::uint32_t mid = lo + (hi - lo) / 2;
    config.table_size = mid;
    if (double(config.parameter_count()) < target) lo = mid + 1; else hi = mid;
  }
  best = lo;
  config.table_size = lo;
  best_err = std::abs(double(config.parameter_count()) - target);
  if (lo > 1) {
    config.table_size = lo - 1;
    if (std::abs(double(config.parameter_count()) - target) < best_err) best = lo - 1;
  }
  return best;
}

GATE_NAMESPACE_END
