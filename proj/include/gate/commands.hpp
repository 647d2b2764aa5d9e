#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gate/checkpoint.hpp"
#include "gate/run_config.hpp"

GATE_NAMESPACE_BEGIN

/// Loaded scene, camera and acceleration structure of a run.
struct RunContext {
  std::unique_ptr<Fixture> fixture;
  std::unique_ptr<Bvh> bvh;

  const Scene& scene() const { return fixture->scene; }
  const Camera& camera() const { return fixture->camera; }
};

RunContext make_context(const RunConfig& cfg);

/// Ground-truth AO image, cached as PFM under <out>/reference_cache keyed by
/// scene, camera and AO parameters.
Image cached_reference(const RunContext& ctx, const RunConfig& cfg);

struct TrainOutcome {
  Model model;
  TriangleTrainState state;
  std::vector<MetricsRow> rows;
  std::optional<Image> final_image;
  double final_mse = 0;
  double final_psnr = 0;
  std::uint64_t config_hash = 0;
};

using ImageCallback = std::function<void(std::int64_t iter, const Image&)>;

/// Trains `encoder` on the run's scene. Evaluates against the reference
/// every cfg.eval_every iterations and after the last one; `on_image` sees
/// every evaluated inference image.
TrainOutcome train_model(const RunContext& ctx, const RunConfig& cfg, const EncoderConfig& encoder,
                         const std::function<void(const MetricsRow&)>& on_row = {},
                         const ImageCallback& on_image = {});

/// CSV row; timing columns are written as 0 in deterministic mode.
std::string csv_row(const MetricsRow& row, bool deterministic);
inline constexpr const char* kCsvHeader = "iter,loss,mse,psnr,ms_train,ms_render";

struct TrainCommandOptions {
  std::optional<std::filesystem::path> checkpoint;  // default <out>/checkpoint.bin
};

/// Writes the checkpoint, metrics.csv, reference.ppm, inference.ppm and
/// inference_<iter>.ppm for intermediate evaluations.
TrainOutcome cmd_train(const RunConfig& cfg, const TrainCommandOptions& options, std::ostream& log);

/// Renders a checkpoint to <out>/render.ppm. With `reference`, also writes
/// reference.ppm and prints "mse=... psnr=..." to `out`.
void cmd_render(const RunConfig& cfg, const std::filesystem::path& checkpoint, bool reference, std::ostream& out);

/// Trains GATE and the hash-grid baseline under identical settings and
/// writes <out>/compare_report.json.
nlohmann::json cmd_compare(const RunConfig& cfg, std::ostream& log);

/// Voronoi image of the finest GATE level plus layout statistics
/// (<out>/voronoi.ppm, <out>/layout_stats.json).
nlohmann::json cmd_viz(const RunConfig& cfg);

/// Triangle counts, areas, normalized mean areas and adaptive resolutions.
nlohmann::json cmd_stats(const RunConfig& cfg);

GATE_NAMESPACE_END
