#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gate/config.hpp"

GATE_NAMESPACE_BEGIN

inline constexpr int kHiddenWidth = 32;
inline constexpr Real kLeakySlope = Real(0.01);

inline Real leaky_relu(Real x) { return x >= 0 ? x : kLeakySlope * x; }

/// Perceptron with two hidden layers of 32 leaky-ReLU units and a linear
/// output. Parameters are stored in one flat array, layer by layer, each
/// layer as a row-major [out][in] weight matrix followed by its bias.
class Mlp {
 public:
  Mlp() = default;
  Mlp(int input_width, int output_width);

  int input_width() const { return input_width_; }
  int output_width() const { return output_width_; }
  std::size_t parameter_count() const { return params_.size(); }

  std::span<Real> params() { return params_; }
  std::span<const Real> params() const { return params_; }

  /// Offsets of layer l's weights and bias inside params(); l in [0, 3).
  std::size_t weight_offset(int layer) const { return offsets_[2 * layer]; }
  std::size_t bias_offset(int layer) const { return offsets_[2 * layer + 1]; }
  int layer_inputs(int layer) const { return layer == 0 ? input_width_ : kHiddenWidth; }
  int layer_outputs(int layer) const { return layer == 2 ? output_width_ : kHiddenWidth; }

  bool operator==(const Mlp&) const = default;

 private:
  int input_width_ = 0;
  int output_width_ = 0;
  std::vector<Real> params_;
  std::vector<std::size_t> offsets_;
};

/// Weights uniform in +-sqrt(6 / fan_in), biases zero.
Mlp mlp_init(int input_width, int output_width, std::uint64_t seed);

struct ForwardCache {
  std::size_t batch = 0;
  std::vector<Real> input;   // batch x D_in
  std::vector<Real> pre1;    // batch x 32
  std::vector<Real> act1;
  std::vector<Real> pre2;
  std::vector<Real> act2;
  std::vector<Real> output;  // batch x D_out
};

/// Evaluates `batch` row-major input rows. Throws on non-finite input.
void mlp_forward(const Mlp& mlp, std::span<const Real> inputs, std::size_t batch, ForwardCache& cache);

/// Adds parameter gradients into `param_grads` and writes dL/dinput
/// (batch x D_in) into `dl_dinput` when it is non-empty.
void mlp_backward(const Mlp& mlp, const ForwardCache& cache, std::span<const Real> dl_doutput,
                  std::span<Real> param_grads, std::span<Real> dl_dinput);

struct LossResult {
  Real loss = 0;
  std::vector<Real> grad;
};

/// Mean over the batch of the squared error summed over outputs;
/// grad = 2 (pred - target) / batch.
LossResult l2_loss(std::span<const Real> pred, std::span<const Real> target, std::size_t batch);

GATE_NAMESPACE_END
