#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "gate/model.hpp"

GATE_NAMESPACE_BEGIN

/// Training-step counters of every triangle, indexed by the scene-global
/// triangle number.
struct TriangleTrainState {
  std::vector<std::uint32_t> steps;
  std::vector<std::int64_t> last_trained_iter;
  std::int64_t last_iteration = 0;

  TriangleTrainState() = default;
  explicit TriangleTrainState(std::size_t triangle_count)
      : steps(triangle_count, 0), last_trained_iter(triangle_count, 0) {}
  bool operator==(const TriangleTrainState&) const = default;
};

struct TrainerConfig {
  int batch_size = 4096;
  int candidates = 16;
  std::uint32_t count_cap = 512;
  int group_size = 4;
  int iterations = 128;
  /// When false, the first candidate is always taken (plain area sampling).
  bool prioritize = true;
  AdamConfig adam;

  void validate() const;
  bool operator==(const TrainerConfig&) const = default;
};

/// Picks triangles with probability proportional to area.
class AreaSampler {
 public:
  explicit AreaSampler(const Scene& scene);
  /// Global triangle index for u in [0, 1).
  std::size_t sample(Real u) const;
  double probability(std::size_t global_triangle) const;
  double total_area() const { return total_; }

 private:
  std::vector<double> cdf_;
  double total_ = 0;
};

struct TrainingSample {
  QueryPoint query;
  Real target = 0;
};

/// Noisy target for one query; must depend only on its arguments.
using TargetOracle = std::function<Real(const QueryPoint&, Pcg32&)>;

/// 1 / min(cap, max(1, t)).
inline Real candidate_weight(std::uint32_t steps, std::uint32_t cap) {
  const std::uint32_t t = std::min(cap, std::max<std::uint32_t>(1, steps));
  return Real(1) / Real(t);
}

/// Index i with probability weights[i] / sum(weights), for u in [0, 1).
std::size_t resample_index(std::span<const Real> weights, Real u);

/// Draws M area-uniform candidates and resamples one of them with
/// probability proportional to candidate_weight of its triangle.
SurfacePoint select_sample(const TriangleTrainState& state, const Scene& scene, const AreaSampler& sampler,
                           const TrainerConfig& cfg, Pcg32& rng);

/// B / G selection rounds; each selected triangle contributes G points, the
/// selected candidate first. Round r uses its own generator derived from
/// (seed, iteration, r), so the batch does not depend on the thread count.
std::vector<TrainingSample> build_batch(const TriangleTrainState& state, const Scene& scene,
                                        const AreaSampler& sampler, const TargetOracle& oracle,
                                        const TrainerConfig& cfg, std::uint64_t seed, std::int64_t iteration);

/// Increments t_T once for every triangle present in the batch. Throws
/// std::logic_error unless `iteration` is larger than any earlier one.
void update_counters(TriangleTrainState& state, const Scene& scene, std::span<const TrainingSample> batch,
                     std::int64_t iteration);

/// Loss and parameter gradients of one batch.
struct Gradients {
  Real loss = 0;
  std::vector<Real> mlp;
  /// GATE: one record per touched slot, in first-touch order.
  std::vector<GradientRecord> features;
  /// Hash grid: dense gradient of every table entry.
  std::vector<Real> grid;
};

/// Encode, forward, L2 loss and backward for `batch`; the model is not
/// modified. Throws std::runtime_error on a non-finite loss.
Gradients compute_gradients(const Model& model, std::span<const TrainingSample> batch);

/// One Adam step on the touched feature slots (GATE) or the whole table
/// (hash grid), then on the MLP.
void apply_gradients(Model& model, const Gradients& grads, const AdamConfig& adam);

struct IterationResult {
  Real loss = 0;
  std::size_t touched_slots = 0;
};

/// One optimizer step on `batch`: encode, forward, L2 loss, backward,
/// sparse (GATE) or dense (hash grid) feature update, dense MLP update, and
/// counter update. Throws std::runtime_error on a non-finite loss.
IterationResult train_iteration(Model& model, TriangleTrainState& state, const Scene& scene,
                                std::span<const TrainingSample> batch, const TrainerConfig& cfg,
                                std::int64_t iteration);

struct MetricsRow {
  std::int64_t iter = 0;
  Real loss = 0;
  std::optional<double> mse;
  std::optional<double> psnr;
  double ms_train = 0;
  double ms_render = 0;
};

struct Evaluation {
  double mse = 0;
  double psnr = 0;
  double ms_render = 0;
};

struct TrainLoopOptions {
  TrainerConfig trainer;
  std::uint64_t seed = 0;
  /// Evaluate every K iterations (0: never); the last iteration is always
  /// evaluated when an evaluator is given.
  int eval_every = 0;
  std::function<Evaluation(std::int64_t iter, const Model&)> evaluator;
  /// Called after each row is produced.
  std::function<void(const MetricsRow&)> on_row;
};

/// Runs `iterations` rounds of build_batch + train_iteration, continuing the
/// iteration numbering stored in `state`. Returns one row per iteration.
std::vector<MetricsRow> train_loop(Model& model, TriangleTrainState& state, const Scene& scene,
                                   const TargetOracle& oracle, const TrainLoopOptions& options);

GATE_NAMESPACE_END
