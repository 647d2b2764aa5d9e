#include "gate/gate_encoding.hpp"

#include <stdexcept>

#include "gate/math.hpp"

GATE_NAMESPACE_BEGIN

FeatureStore init_features(const FeatureLayout& layout, std::uint64_t seed) {
  FeatureStore store;
  store.features = layout.features_per_level();
  const std::size_t n = std::size_t(layout.total_slots()) * std::size_t(store.features);
  store.values.resize(n);
  store.adam_m.assign(n, 0);
  store.adam_v.assign(n, 0);
  store.slot_step_count.assign(layout.total_slots(), 0);
  for (std::size_t l = 0; l < layout.level_count(); ++l) store.level_bases.push_back(layout.level(l).base);
  Pcg32 rng(derive_seed(seed, 0x6665617475726573ULL));
  for (Real& v : store.values) v = rng.uniform(-kFeatureInitMagnitude, kFeatureInitMagnitude);
  return store;
}

void gate_encode(const FeatureStore& store, const FeatureLayout& layout, const SurfacePoint& point,
                 std::span<Real> out) {
  const auto features = static_cast<std::size_t>(layout.features_per_level());
  if (out.size() != gate_encoding_width(layout)) throw std::invalid_argument("gate_encode: bad output width");
  for (std::size_t l = 0; l < layout.level_count(); ++l) {
    const LookupResult lookup = layout.resolve(l, point);
    Real* z = out.data() + l * features;
    for (std::size_t f = 0; f < features; ++f) z[f] = 0;
    for (int t = 0; t < 3; ++t) {
      const Real w = lookup.weights[t];
      const Real* src = store.values.data() + std::size_t(lookup.slots[t]) * features;
      for (std::size_t f = 0; f < features; ++f) z[f] += w * src[f];
    }
  }
}

std::vector<Real> gate_encode(const FeatureStore& store, const FeatureLayout& layout,
                              const SurfacePoint& point) {
  std::vector<Real> out(gate_encoding_width(layout));
  gate_encode(store, layout, point, out);
  return out;
}

GradientAccumulator::GradientAccumulator(std::size_t slot_count, int features)
    : features_(features), index_of_slot_(slot_count, -1) {
  if (features < 1 || features > kMaxFeatures) throw std::invalid_argument("features must be in [1, 8]");
}

void GradientAccumulator::add(std::uint32_t slot, Real weight, std::span<const Real> dl_dz,
                              const TriangleRef& owner) {
  std::int32_t& idx = index_of_slot_.at(slot);
  if (idx < 0) {
    idx = static_cast<std::int32_t>(records_.size());
    records_.push_back(GradientRecord{slot, {}, owner});
  }
  GradientRecord& rec = records_[static_cast<std::size_t>(idx)];
  for (int f = 0; f < features_; ++f) rec.grad[f] += weight * dl_dz[f];
}

void GradientAccumulator::clear() {
  for (const GradientRecord& r : records_) index_of_slot_[r.slot] = -1;
  records_.clear();
}

void gate_backward(const FeatureLayout& layout, const SurfacePoint& point,
                   std::span<const Real> dl_dz, GradientAccumulator& out) {
  const auto features = static_cast<std::size_t>(layout.features_per_level());
  if (dl_dz.size() != gate_encoding_width(layout)) {
    throw std::invalid_argument("gate_backward: gradient width does not match the encoding");
  }
  const TriangleRef owner{point.mesh_id, point.tri_id};
  for (std::size_t l = 0; l < layout.level_count(); ++l) {
    const LookupResult lookup = layout.resolve(l, point);
    const auto slice = dl_dz.subspan(l * features, features);
    for (int t = 0; t < 3; ++t) {
      // Zero-weight taps carry no gradient; suppressing them keeps the
      // records (and the Adam step) limited to slots that influenced z.
      if (lookup.weights[t] == 0) continue;
      out.add(lookup.slots[t], lookup.weights[t], slice, owner);
    }
  }
}

std::vector<GradientRecord> gate_backward(const FeatureLayout& layout, const SurfacePoint& point,
                                          std::span<const Real> dl_dz) {
  GradientAccumulator acc(layout.total_slots(), layout.features_per_level());
  gate_backward(layout, point, dl_dz, acc);
  return acc.records();
}

GATE_NAMESPACE_END
