#include "gate/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "gate/parallel.hpp"

GATE_NAMESPACE_BEGIN

namespace {

constexpr std::size_t kRoundsPerChunk = 64;
constexpr std::size_t kSamplesPerChunk = 256;

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

void TrainerConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (candidates < 1) throw std::invalid_argument("candidate count must be >= 1");
  if (count_cap < 1) throw std::invalid_argument("count cap must be >= 1");
  if (group_size < 1 || batch_size % group_size != 0) {
    throw std::invalid_argument("group size must be >= 1 and divide the batch size");
  }
  if (iterations < 0) throw std::invalid_argument("iteration count must be >= 0");
  adam.validate();
}

AreaSampler::AreaSampler(const Scene& scene) {
  cdf_.reserve(scene.triangle_count());
  for (const Mesh& mesh : scene.meshes()) {
    for (std::uint32_t t = 0; t < mesh.triangle_count(); ++t) {
      total_ += double(triangle_area(mesh, t));
      cdf_.push_back(total_);
    }
  }
  if (!(total_ > 0)) throw std::invalid_argument("scene has no triangle with positive area");
}

std::size_t AreaSampler::sample(Real u) const {
  const double x = double(u) * total_;
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), x);
  if (it == cdf_.end()) {
    // u rounded up to 1: take the last triangle with positive area.
    std::size_t i = cdf_.size() - 1;
    while (i > 0 && cdf_[i] == cdf_[i - 1]) --i;
    return i;
  }
  return static_cast<std::size_t>(it - cdf_.begin());
}

double AreaSampler::probability(std::size_t global_triangle) const {
  const double prev = global_triangle == 0 ? 0.0 : cdf_.at(global_triangle - 1);
  return (cdf_.at(global_triangle) - prev) / total_;
}

std::size_t resample_index(std::span<const Real> weights, Real u) {
  if (weights.empty()) throw std::invalid_argument("resample_index: no candidates");
  double total = 0;
  for (Real w : weights) total += double(w);
  const double x = double(u) * total;
  double acc = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += double(weights[i]);
    if (x < acc) return i;
  }
  return weights.size() - 1;
}

SurfacePoint select_sample(const TriangleTrainState& state, const Scene& scene, const AreaSampler& sampler,
                           const TrainerConfig& cfg, Pcg32& rng) {
  thread_local std::vector<SurfacePoint> candidates;
  thread_local std::vector<Real> weights;
  candidates.clear();
  weights.clear();
  for (int m = 0; m < cfg.candidates; ++m) {
    const std::size_t global = sampler.sample(rng.uniform());
    const auto [mesh_id, tri_id] = scene.split_global(global);
    const Real u1 = rng.uniform();
    const Real u2 = rng.uniform();
    candidates.push_back(sample_surface_point(mesh_id, tri_id, u1, u2));
    weights.push_back(candidate_weight(state.steps[global], cfg.count_cap));
  }
  if (!cfg.prioritize) return candidates.front();
  return candidates[resample_index(weights, rng.uniform())];
}

std::vector<TrainingSample> build_batch(const TriangleTrainState& state, const Scene& scene,
                                        const AreaSampler& sampler, const TargetOracle& oracle,
                                        const TrainerConfig& cfg, std::uint64_t seed, std::int64_t iteration) {
  cfg.validate();
  const auto group = static_cast<std::size_t>(cfg.group_size);
  const std::size_t rounds = static_cast<std::size_t>(cfg.batch_size) / group;
  std::vector<TrainingSample> batch(rounds * group);
  const std::size_t chunks = (rounds + kRoundsPerChunk - 1) / kRoundsPerChunk;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t end = std::min(rounds, (c + 1) * kRoundsPerChunk);
    for (std::size_t r = c * kRoundsPerChunk; r < end; ++r) {
      Pcg32 rng(derive_seed(seed, static_cast<std::uint64_t>(iteration), r));
      const SurfacePoint first = select_sample(state, scene, sampler, cfg, rng);
      for (std::size_t g = 0; g < group; ++g) {
        SurfacePoint p = first;
        if (g > 0) {
          const Real u1 = rng.uniform();
          const Real u2 = rng.uniform();
          p = sample_surface_point(first.mesh_id, first.tri_id, u1, u2);
        }
        TrainingSample& s = batch[r * group + g];
        s.query = make_query(scene, p);
        s.target = oracle(s.query, rng);
      }
    }
  });
  return batch;
}

void update_counters(TriangleTrainState& state, const Scene& scene, std::span<const TrainingSample> batch,
                     std::int64_t iteration) {
  if (iteration <= state.last_iteration) {
    throw std::logic_error("update_counters: iteration ids must increase (got " + std::to_string(iteration) +
                           " after " + std::to_string(state.last_iteration) + ")");
  }
  for (const TrainingSample& s : batch) {
    const std::size_t g = scene.global_triangle(s.query.point.mesh_id, s.query.point.tri_id);
    if (state.last_trained_iter[g] < iteration) {
      ++state.steps[g];
      state.last_trained_iter[g] = iteration;
    }
  }
  state.last_iteration = iteration;
}

Gradients compute_gradients(const Model& model, std::span<const TrainingSample> batch) {
  if (batch.empty()) throw std::invalid_argument("compute_gradients: empty batch");
  const std::size_t n = batch.size();
  const std::size_t width = model.input_width();
  const std::size_t chunks = (n + kSamplesPerChunk - 1) / kSamplesPerChunk;

  std::vector<ForwardCache> caches(chunks);
  std::vector<Real> predictions(n), targets(n);
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t begin = c * kSamplesPerChunk;
    const std::size_t end = std::min(n, begin + kSamplesPerChunk);
    std::vector<Real> inputs((end - begin) * width);
    for (std::size_t i = begin; i < end; ++i) {
      model.encode(batch[i].query, std::span<Real>(inputs).subspan((i - begin) * width, width));
      targets[i] = batch[i].target;
    }
    mlp_forward(model.mlp, inputs, end - begin, caches[c]);
    std::copy(caches[c].output.begin(), caches[c].output.end(),
              predictions.begin() + static_cast<std::ptrdiff_t>(begin));
  });

  const LossResult loss = l2_loss(predictions, targets, n);
  if (!std::isfinite(loss.loss)) {
    std::ostringstream msg;
    msg << "non-finite training loss (batch " << n << ")";
    throw std::runtime_error(msg.str());
  }

  // Backward per chunk into private MLP gradient buffers, reduced in chunk
  // order so the sum does not depend on scheduling.
  const std::size_t param_count = model.mlp.parameter_count();
  std::vector<std::vector<Real>> chunk_grads(chunks, std::vector<Real>(param_count, 0));
  std::vector<Real> dl_dinput(n * width);
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t begin = c * kSamplesPerChunk;
    const std::size_t end = std::min(n, begin + kSamplesPerChunk);
    mlp_backward(model.mlp, caches[c], std::span<const Real>(loss.grad).subspan(begin, end - begin),
                 chunk_grads[c], std::span<Real>(dl_dinput).subspan(begin * width, (end - begin) * width));
  });

  Gradients out;
  out.loss = loss.loss;
  out.mlp.assign(param_count, 0);
  for (const auto& g : chunk_grads) {
    for (std::size_t i = 0; i < param_count; ++i) out.mlp[i] += g[i];
  }

  const std::size_t enc = model.encoding_width();
  if (model.kind() == EncoderKind::Gate) {
    thread_local GradientAccumulator acc;
    if (acc.slot_count() != model.features.slot_count() || acc.features() != model.features.features) {
      acc = GradientAccumulator(model.features.slot_count(), model.features.features);
    }
    acc.clear();
    for (std::size_t i = 0; i < n; ++i) {
      gate_backward(model.layout(), batch[i].query.point,
                    std::span<const Real>(dl_dinput).subspan(i * width, enc), acc);
    }
    out.features = acc.records();
  } else {
    out.grid.assign(model.grid.params.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      hashgrid_backward(model.grid, batch[i].query.position, model.bounds(),
                        std::span<const Real>(dl_dinput).subspan(i * width, enc), out.grid);
    }
  }
  return out;
}

void apply_gradients(Model& model, const Gradients& grads, const AdamConfig& adam) {
  if (model.kind() == EncoderKind::Gate) {
    adam_step_sparse(model.features, grads.features, adam);
  } else {
    adam_step_dense(model.grid.params, grads.grid, model.grid.adam_m, model.grid.adam_v, ++model.grid.step, adam);
  }
  adam_step_dense(model.mlp.params(), grads.mlp, model.mlp_m, model.mlp_v, ++model.mlp_step, adam);
}

IterationResult train_iteration(Model& model, TriangleTrainState& state, const Scene& scene,
                                std::span<const TrainingSample> batch, const TrainerConfig& cfg,
                                std::int64_t iteration) {
  if (iteration <= state.last_iteration) {
    throw std::logic_error("train_iteration: iteration ids must increase");
  }
  Gradients grads;
  try {
    grads = compute_gradients(model, batch);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(std::string(e.what()) + " at iteration " + std::to_string(iteration));
  }
  apply_gradients(model, grads, cfg.adam);
  update_counters(state, scene, batch, iteration);
  IterationResult result;
  result.loss = grads.loss;
  result.touched_slots = model.kind() == EncoderKind::Gate
                             ? grads.features.size()
                             : model.grid.params.size() / std::size_t(model.grid.config.features);
  return result;
}

std::vector<MetricsRow> train_loop(Model& model, TriangleTrainState& state, const Scene& scene,
                                   const TargetOracle& oracle, const TrainLoopOptions& options) {
  options.trainer.validate();
  const AreaSampler sampler(scene);
  std::vector<MetricsRow> rows;
  rows.reserve(static_cast<std::size_t>(options.trainer.iterations));
  const std::uint64_t batch_seed = derive_seed(options.seed, 0x6261746368ULL);
  for (int k = 0; k < options.trainer.iterations; ++k) {
    const std::int64_t iter = state.last_iteration + 1;
    const auto start = std::chrono::steady_clock::now();
    const std::vector<TrainingSample> batch =
        build_batch(state, scene, sampler, oracle, options.trainer, batch_seed, iter);
    const IterationResult it = train_iteration(model, state, scene, batch, options.trainer, iter);

    MetricsRow row;
    row.iter = iter;
    row.loss = it.loss;
    row.ms_train = elapsed_ms(start);
    const bool last = k + 1 == options.trainer.iterations;
    if (options.evaluator && (last || (options.eval_every > 0 && (k + 1) % options.eval_every == 0))) {
      const Evaluation e = options.evaluator(iter, model);
      row.mse = e.mse;
      row.psnr = e.psnr;
      row.ms_render = e.ms_render;
    }
    if (options.on_row) options.on_row(row);
    rows.push_back(row);
  }
  return rows;
}

GATE_NAMESPACE_END
