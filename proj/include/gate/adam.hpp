#pragma once

#include <cmath>
#include <cstdint>
#include <span>

#include "gate/gate_encoding.hpp"

GATE_NAMESPACE_BEGIN

struct AdamConfig {
  Real lr = Real(1e-2);
  Real beta1 = Real(0.9);
  Real beta2 = Real(0.999);
  Real epsilon = Real(1e-8);

  void validate() const;
  bool operator==(const AdamConfig&) const = default;
};

/// One Adam update of a scalar with bias correction for step t (t >= 1).
inline void adam_update(Real& param, Real grad, Real& m, Real& v, std::uint64_t t, const AdamConfig& cfg) {
  m = cfg.beta1 * m + (1 - cfg.beta1) * grad;
  v = cfg.beta2 * v + (1 - cfg.beta2) * grad * grad;
  const Real m_hat = m / (1 - std::pow(cfg.beta1, Real(t)));
  const Real v_hat = v / (1 - std::pow(cfg.beta2, Real(t)));
  param -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
}

/// Updates every parameter with the shared global step count t.
void adam_step_dense(std::span<Real> params, std::span<const Real> grads, std::span<Real> m,
                     std::span<Real> v, std::uint64_t t, const AdamConfig& cfg);

/// Updates only the slots named by `records`. Each touched slot first
/// increments its own step count and uses it for bias correction; every other
/// slot is left bit-identical. Throws std::logic_error on a duplicate slot.
void adam_step_sparse(FeatureStore& store, std::span<const GradientRecord> records, const AdamConfig& cfg);

GATE_NAMESPACE_END
