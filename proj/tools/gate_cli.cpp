#include <cstdlib>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "gate/commands.hpp"

namespace {

struct GlobalOptions {
  std::string config;
  std::string fixture;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool deterministic = false;
};

gate::RunConfig resolve_config(const GlobalOptions& g) {
  gate::RunConfig cfg;
  if (!g.config.empty()) {
    cfg = gate::load_run_config(g.config);
  } else if (g.fixture.empty()) {
    cfg.fixture = "corner";
  }
  if (!g.fixture.empty()) {
    cfg.fixture = g.fixture;
    cfg.scene.clear();
  }
  if (!g.out.empty()) cfg.out = g.out;
  if (g.seed) cfg.seed = *g.seed;
  if (g.threads) cfg.threads = *g.threads;
  if (g.deterministic) cfg.deterministic = true;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometry-aware trained encodings for neural ambient occlusion"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  app.add_option("--fixture", g.fixture, "Built-in scene instead of a manifest")
      ->check(CLI::IsMember({"corner", "quad", "stadium", "mixed"}));
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--threads", g.threads, "Worker threads (0: all cores)");
  app.add_flag("--deterministic", g.deterministic, "Reproducible artifacts (timings written as 0)");

  auto* train = app.add_subcommand("train", "Train a model online and write a checkpoint");
  std::optional<int> iters, batch, group, candidates;
  std::string checkpoint;
  train->add_option("--iters", iters, "Training iterations")->check(CLI::NonNegativeNumber);
  train->add_option("--batch", batch, "Samples per iteration")->check(CLI::PositiveNumber);
  train->add_option("--group", group, "Samples per selected triangle")->check(CLI::PositiveNumber);
  train->add_option("--candidates", candidates, "Candidates per selection")->check(CLI::PositiveNumber);
  train->add_option("--checkpoint", checkpoint, "Checkpoint path (default <out>/checkpoint.bin)");

  auto* render = app.add_subcommand("render", "Render a checkpoint");
  std::string render_ckpt;
  bool with_reference = false;
  render->add_option("--checkpoint", render_ckpt, "Checkpoint to render")->required();
  render->add_flag("--reference", with_reference, "Also render the reference and print mse/psnr");

  auto* compare = app.add_subcommand("compare", "Train GATE and the hash-grid baseline side by side");
  std::optional<int> compare_iters;
  std::optional<std::uint32_t> table_size;
  compare->add_option("--iters", compare_iters, "Training iterations")->check(CLI::NonNegativeNumber);
  compare->add_option("--table-size", table_size, "Fixed hash table size (default: parameter matched)")
      ->check(CLI::PositiveNumber);

  app.add_subcommand("viz", "Render the feature Voronoi image and layout statistics");
  app.add_subcommand("stats", "Print scene and resolution statistics");

  CLI11_PARSE(app, argc, argv);

  try {
    gate::RunConfig cfg = resolve_config(g);
    if (train->parsed()) {
      if (iters) cfg.trainer.iterations = *iters;
      if (batch) cfg.trainer.batch_size = *batch;
      if (group) cfg.trainer.group_size = *group;
      if (candidates) cfg.trainer.candidates = *candidates;
      gate::TrainCommandOptions options;
      if (!checkpoint.empty()) options.checkpoint = checkpoint;
      gate::cmd_train(cfg, options, std::cout);
    } else if (render->parsed()) {
      gate::cmd_render(cfg, render_ckpt, with_reference, std::cout);
    } else if (compare->parsed()) {
      if (compare_iters) cfg.trainer.iterations = *compare_iters;
      if (table_size) {
        cfg.auto_table_size = false;
        cfg.baseline.hash.table_size = *table_size;
      }
      std::cout << gate::cmd_compare(cfg, std::cerr).dump(2) << '\n';
    } else if (app.got_subcommand("viz")) {
      std::cout << gate::cmd_viz(cfg).dump(2) << '\n';
    } else if (app.got_subcommand("stats")) {
      std::cout << gate::cmd_stats(cfg).dump(2) << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return EXIT_FAILURE;
  }
  return EXIT_SUCCESS;
}
