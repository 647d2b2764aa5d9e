#include "gate/adam.hpp"

#include <stdexcept>
#include <string>
#include <vector>

GATE_NAMESPACE_BEGIN

void AdamConfig::validate() const {
  if (!(lr > 0)) throw std::invalid_argument("Adam learning rate must be positive");
  if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1)) {
    throw std::invalid_argument("Adam betas must lie in (0, 1)");
  }
  if (!(epsilon > 0)) throw std::invalid_argument("Adam epsilon must be positive");
}

void adam_step_dense(std::span<Real> params, std::span<const Real> grads, std::span<Real> m,
                     std::span<Real> v, std::uint64_t t, const AdamConfig& cfg) {
  if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size()) {
    throw std::invalid_argument("adam_step_dense: shape mismatch");
  }
  if (t < 1) throw std::invalid_argument("adam_step_dense: step count must be >= 1");
  const Real bc1 = 1 - std::pow(cfg.beta1, Real(t));
  const Real bc2 = 1 - std::pow(cfg.beta2, Real(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Real g = grads[i];
    m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g;
    v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g * g;
    params[i] -= cfg.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.epsilon);
  }
}

void adam_step_sparse(FeatureStore& store, std::span<const GradientRecord> records, const AdamConfig& cfg) {
  thread_local std::vector<std::uint8_t> seen;
  if (seen.size() < store.slot_count()) seen.resize(store.slot_count(), 0);
  for (std::size_t r = 0; r < records.size(); ++r) {
    const std::uint32_t slot = records[r].slot;
    if (slot >= store.slot_count() || seen[slot]) {
      for (std::size_t q = 0; q < r; ++q) seen[records[q].slot] = 0;
      throw std::logic_error("adam_step_sparse: slot " + std::to_string(slot) +
                             (slot >= store.slot_count() ? " out of range" : " appears twice"));
    }
    seen[slot] = 1;
  }
  for (const GradientRecord& rec : records) seen[rec.slot] = 0;

  const auto features = static_cast<std::size_t>(store.features);
  for (const GradientRecord& rec : records) {
    const std::uint32_t t = ++store.slot_step_count[rec.slot];
    const std::size_t base = std::size_t(rec.slot) * features;
    const Real bc1 = 1 - std::pow(cfg.beta1, Real(t));
    const Real bc2 = 1 - std::pow(cfg.beta2, Real(t));
    for (std::size_t f = 0; f < features; ++f) {
      Real& m = store.adam_m[base + f];
      Real& v = store.adam_v[base + f];
      const Real g = rec.grad[f];
      m = cfg.beta1 * m + (1 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
      store.values[base + f] -= cfg.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.epsilon);
    }
  }
}

GATE_NAMESPACE_END
