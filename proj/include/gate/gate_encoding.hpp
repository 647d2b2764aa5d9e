#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "gate/mesh_colors.hpp"

GATE_NAMESPACE_BEGIN

/// Trainable feature vectors of a FeatureLayout plus their sparse Adam state.
/// `values`, `adam_m` and `adam_v` hold total_slots x L reals, slot-major.
struct FeatureStore {
  int features = 2;
  std::vector<Real> values;
  std::vector<Real> adam_m;
  std::vector<Real> adam_v;
  std::vector<std::uint32_t> slot_step_count;
  std::vector<std::uint32_t> level_bases;  // first slot of each level

  std::size_t slot_count() const { return slot_step_count.size(); }
  std::span<Real> slot(std::uint32_t s) { return {values.data() + std::size_t(s) * features, std::size_t(features)}; }
  std::span<const Real> slot(std::uint32_t s) const {
    return {values.data() + std::size_t(s) * features, std::size_t(features)};
  }
  bool operator==(const FeatureStore&) const = default;
};

inline constexpr Real kFeatureInitMagnitude = Real(1e-4);

/// Uniform values in [-1e-4, 1e-4]; zero optimizer state.
FeatureStore init_features(const FeatureLayout& layout, std::uint64_t seed);

/// Width of the GATE encoding: levels x L.
inline std::size_t gate_encoding_width(const FeatureLayout& layout) {
  return layout.level_count() * static_cast<std::size_t>(layout.features_per_level());
}

/// Interpolated features of every level, concatenated in level order.
void gate_encode(const FeatureStore& store, const FeatureLayout& layout, const SurfacePoint& point,
                 std::span<Real> out);
std::vector<Real> gate_encode(const FeatureStore& store, const FeatureLayout& layout,
                              const SurfacePoint& point);

struct TriangleRef {
  std::uint32_t mesh_id = 0;
  std::uint32_t tri_id = 0;
  bool operator==(const TriangleRef&) const = default;
};

/// Accumulated feature gradient for one slot within one iteration.
struct GradientRecord {
  std::uint32_t slot = 0;
  std::array<Real, kMaxFeatures> grad{};
  TriangleRef owner;
};

/// Deduplicates gradient contributions by slot. Reset cost is proportional to
/// the number of touched slots, not to the store size.
class GradientAccumulator {
 public:
  GradientAccumulator() = default;
  GradientAccumulator(std::size_t slot_count, int features);

  void add(std::uint32_t slot, Real weight, std::span<const Real> dl_dz, const TriangleRef& owner);
  const std::vector<GradientRecord>& records() const { return records_; }
  void clear();
  int features() const { return features_; }
  std::size_t slot_count() const { return index_of_slot_.size(); }

 private:
  int features_ = 0;
  std::vector<std::int32_t> index_of_slot_;
  std::vector<GradientRecord> records_;
};

/// Adds w_t * (level slice of dl_dz) to each of the three slots of every level.
void gate_backward(const FeatureLayout& layout, const SurfacePoint& point,
                   std::span<const Real> dl_dz, GradientAccumulator& out);
/// Convenience form returning deduplicated records for a single point.
std::vector<GradientRecord> gate_backward(const FeatureLayout& layout, const SurfacePoint& point,
                                          std::span<const Real> dl_dz);

GATE_NAMESPACE_END
