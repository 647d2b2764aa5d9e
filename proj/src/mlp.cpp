#include "gate/mlp.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

#include "gate/math.hpp"

GATE_NAMESPACE_BEGIN

Mlp::Mlp(int input_width, int output_width) : input_width_(input_width), output_width_(output_width) {
  if (input_width < 1 || output_width < 1) throw std::invalid_argument("MLP widths must be >= 1");
  std::size_t offset = 0;
  for (int l = 0; l < 3; ++l) {
    offsets_.push_back(offset);
    offset += std::size_t(layer_inputs(l)) * std::size_t(layer_outputs(l));
    offsets_.push_back(offset);
    offset += std::size_t(layer_outputs(l));
  }
  params_.assign(offset, 0);
}

Mlp mlp_init(int input_width, int output_width, std::uint64_t seed) {
  Mlp mlp(input_width, output_width);
  Pcg32 rng(derive_seed(seed, 0x6d6c70ULL));
  auto params = mlp.params();
  for (int l = 0; l < 3; ++l) {
    const Real bound = std::sqrt(Real(6) / Real(mlp.layer_inputs(l)));
    const std::size_t n = std::size_t(mlp.layer_inputs(l)) * std::size_t(mlp.layer_outputs(l));
    for (std::size_t i = 0; i < n; ++i) params[mlp.weight_offset(l) + i] = rng.uniform(-bound, bound);
  }
  return mlp;
}

namespace {

// y[o] = b[o] + sum_i W[o][i] x[i]
inline void affine(const Real* w, const Real* b, const Real* x, int in, int out, Real* y) {
  for (int o = 0; o < out; ++o) {
    const Real* row = w + std::size_t(o) * std::size_t(in);
    Real s = b[o];
    for (int i = 0; i < in; ++i) s += row[i] * x[i];
    y[o] = s;
  }
}

}  // namespace

void mlp_forward(const Mlp& mlp, std::span<const Real> inputs, std::size_t batch, ForwardCache& cache) {
  const int d_in = mlp.input_width();
  const int d_out = mlp.output_width();
  if (inputs.size() != batch * std::size_t(d_in)) throw std::invalid_argument("mlp_forward: bad input size");
  for (Real x : inputs) {
    if (!std::isfinite(x)) throw std::invalid_argument("mlp_forward: non-finite input");
  }
  cache.batch = batch;
  cache.input.assign(inputs.begin(), inputs.end());
  cache.pre1.resize(batch * kHiddenWidth);
  cache.act1.resize(batch * kHiddenWidth);
  cache.pre2.resize(batch * kHiddenWidth);
  cache.act2.resize(batch * kHiddenWidth);
  cache.output.resize(batch * std::size_t(d_out));

  const Real* p = mlp.params().data();
  for (std::size_t s = 0; s < batch; ++s) {
    const std::size_t h = s * kHiddenWidth;
    affine(p + mlp.weight_offset(0), p + mlp.bias_offset(0), inputs.data() + s * d_in, d_in, kHiddenWidth,
           cache.pre1.data() + h);
    for (int k = 0; k < kHiddenWidth; ++k) cache.act1[h + k] = leaky_relu(cache.pre1[h + k]);
    affine(p + mlp.weight_offset(1), p + mlp.bias_offset(1), cache.act1.data() + h, kHiddenWidth, kHiddenWidth,
           cache.pre2.data() + h);
    for (int k = 0; k < kHiddenWidth; ++k) cache.act2[h + k] = leaky_relu(cache.pre2[h + k]);
    affine(p + mlp.weight_offset(2), p + mlp.bias_offset(2), cache.act2.data() + h, kHiddenWidth, d_out,
           cache.output.data() + s * d_out);
  }
}

void mlp_backward(const Mlp& mlp, const ForwardCache& cache, std::span<const Real> dl_doutput,
                  std::span<Real> param_grads, std::span<Real> dl_dinput) {
  const int d_in = mlp.input_width();
  const int d_out = mlp.output_width();
  const std::size_t batch = cache.batch;
  if (dl_doutput.size() != batch * std::size_t(d_out)) throw std::invalid_argument("mlp_backward: bad gradient size");
  if (param_grads.size() != mlp.parameter_count()) throw std::invalid_argument("mlp_backward: bad parameter buffer");
  if (!dl_dinput.empty() && dl_dinput.size() != batch * std::size_t(d_in)) {
    throw std::invalid_argument("mlp_backward: bad input-gradient buffer");
  }

  const Real* p = mlp.params().data();
  const Real* w1 = p + mlp.weight_offset(0);
  const Real* w2 = p + mlp.weight_offset(1);
  const Real* w3 = p + mlp.weight_offset(2);
  Real* gw1 = param_grads.data() + mlp.weight_offset(0);
  Real* gb1 = param_grads.data() + mlp.bias_offset(0);
  Real* gw2 = param_grads.data() + mlp.weight_offset(1);
  Real* gb2 = param_grads.data() + mlp.bias_offset(1);
  Real* gw3 = param_grads.data() + mlp.weight_offset(2);
  Real* gb3 = param_grads.data() + mlp.bias_offset(2);

  std::array<Real, kHiddenWidth> d2{}, d1{};
  for (std::size_t s = 0; s < batch; ++s) {
    const std::size_t h = s * kHiddenWidth;
    const Real* dout = dl_doutput.data() + s * d_out;
    const Real* a2 = cache.act2.data() + h;
    const Real* a1 = cache.act1.data() + h;
    const Real* x = cache.input.data() + s * d_in;

    d2.fill(0);
    for (int o = 0; o < d_out; ++o) {
      const Real g = dout[o];
      gb3[o] += g;
      Real* row = gw3 + std::size_t(o) * kHiddenWidth;
      const Real* wrow = w3 + std::size_t(o) * kHiddenWidth;
      for (int k = 0; k < kHiddenWidth; ++k) {
        row[k] += g * a2[k];
        d2[k] += wrow[k] * g;
      }
    }
    for (int k = 0; k < kHiddenWidth; ++k) d2[k] *= cache.pre2[h + k] >= 0 ? Real(1) : kLeakySlope;

    d1.fill(0);
    for (int o = 0; o < kHiddenWidth; ++o) {
      const Real g = d2[o];
      gb2[o] += g;
      Real* row = gw2 + std::size_t(o) * kHiddenWidth;
      const Real* wrow = w2 + std::size_t(o) * kHiddenWidth;
      for (int k = 0; k < kHiddenWidth; ++k) {
        row[k] += g * a1[k];
        d1[k] += wrow[k] * g;
      }
    }
    for (int k = 0; k < kHiddenWidth; ++k) d1[k] *= cache.pre1[h + k] >= 0 ? Real(1) : kLeakySlope;

    Real* dx = dl_dinput.empty() ? nullptr : dl_dinput.data() + s * d_in;
    if (dx) {
      for (int i = 0; i < d_in; ++i) dx[i] = 0;
    }
    for (int o = 0; o < kHiddenWidth; ++o) {
      const Real g = d1[o];
      gb1[o] += g;
      Real* row = gw1 + std::size_t(o) * std::size_t(d_in);
      const Real* wrow = w1 + std::size_t(o) * std::size_t(d_in);
      for (int i = 0; i < d_in; ++i) {
        row[i] += g * x[i];
        if (dx) dx[i] += wrow[i] * g;
      }
    }
  }
}

LossResult l2_loss(std::span<const Real> pred, std::span<const Real> target, std::size_t batch) {
  if (pred.size() != target.size()) throw std::invalid_argument("l2_loss: size mismatch");
  if (batch == 0) throw std::invalid_argument("l2_loss: empty batch");
  LossResult out;
  out.grad.resize(pred.size());
  double sum = 0;
  const Real scale = Real(2) / Real(batch);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const Real diff = pred[i] - target[i];
    sum += double(diff) * double(diff);
    out.grad[i] = scale * diff;
  }
  out.loss = static_cast<Real>(sum / double(batch));
  return out;
}

GATE_NAMESPACE_END
