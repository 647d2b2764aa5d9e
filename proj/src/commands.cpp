#include "gate/commands.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>

#include "gate/parallel.hpp"

GATE_NAMESPACE_BEGIN

using nlohmann::json;

namespace {

constexpr std::uint64_t kReferenceSeed = 0x7265666572656e63ULL;

std::filesystem::path out_dir(const RunConfig& cfg) {
  std::filesystem::path dir = cfg.out;
  std::filesystem::create_directories(dir);
  return dir;
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

double ms_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

std::string format_real(double v, const char* fmt) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

}  // namespace

RunContext make_context(const RunConfig& cfg) {
  cfg.validate();
  set_thread_count(cfg.threads);
  RunContext ctx;
  ctx.fixture = std::make_unique<Fixture>(load_run_scene(cfg));
  ctx.bvh = std::make_unique<Bvh>(ctx.fixture->scene);
  return ctx;
}

Image cached_reference(const RunContext& ctx, const RunConfig& cfg) {
  const AoParams ao = cfg.ao.resolved(ctx.scene());
  json key = {{"scene", hex64(scene_hash(ctx.scene()))},
              {"camera", camera_to_json(ctx.camera())},
              {"ao", {{"spp", ao.reference_spp}, {"max_dist", double(ao.max_dist)}}},
              {"seed", kReferenceSeed}};
  const std::string text = key.dump();
  const std::filesystem::path dir = std::filesystem::path(cfg.out) / "reference_cache";
  const std::filesystem::path path = dir / (hex64(fnv1a64(text.data(), text.size())) + ".pfm");
  if (std::filesystem::exists(path)) {
    Image cached = read_pfm(path);
    if (cached.width == ctx.camera().width && cached.height == ctx.camera().height) return cached;
  }
  Image image = render_reference(*ctx.bvh, ctx.camera(), ao, kReferenceSeed);
  std::filesystem::create_directories(dir);
  write_pfm(image, path);
  // PFM stores floats; return what a later cache hit would return.
  return read_pfm(path);
}

TrainOutcome train_model(const RunContext& ctx, const RunConfig& cfg, const EncoderConfig& encoder,
                         const std::function<void(const MetricsRow&)>& on_row, const ImageCallback& on_image) {
  TrainOutcome outcome;
  outcome.config_hash = config_hash(ctx.scene(), encoder);
  outcome.model = Model(ctx.scene(), encoder, derive_seed(cfg.seed, 0x6d6f64656cULL));
  outcome.state = TriangleTrainState(ctx.scene().triangle_count());

  std::optional<Image> reference;
  TrainLoopOptions options;
  options.trainer = cfg.trainer;
  options.seed = cfg.seed;
  options.eval_every = cfg.eval_every;
  options.on_row = on_row;
  options.evaluator = [&](std::int64_t iter, const Model& model) {
    if (!reference) reference = cached_reference(ctx, cfg);
    const auto start = std::chrono::steady_clock::now();
    Image image = render_inference(*ctx.bvh, ctx.camera(), model);
    Evaluation e;
    e.ms_render = ms_since(start);
    e.mse = mse(image, *reference);
    e.psnr = psnr_from_mse(e.mse);
    if (on_image) on_image(iter, image);
    outcome.final_image = std::move(image);
    outcome.final_mse = e.mse;
    outcome.final_psnr = e.psnr;
    return e;
  };
  const AoParams ao = cfg.ao.resolved(ctx.scene());
  outcome.rows = train_loop(outcome.model, outcome.state, ctx.scene(), make_ao_oracle(*ctx.bvh, ao), options);
  return outcome;
}

std::string csv_row(const MetricsRow& row, bool deterministic) {
  std::string s = std::to_string(row.iter) + "," + format_real(double(row.loss), "%.9g") + ",";
  if (row.mse) s += format_real(*row.mse, "%.9g");
  s += ",";
  if (row.psnr) s += format_real(*row.psnr, "%.6f");
  s += ",";
  s += deterministic ? std::string("0") : format_real(row.ms_train, "%.3f");
  s += ",";
  s += deterministic ? std::string("0") : format_real(row.ms_render, "%.3f");
  return s;
}

TrainOutcome cmd_train(const RunConfig& cfg, const TrainCommandOptions& options, std::ostream& log) {
  const RunContext ctx = make_context(cfg);
  const std::filesystem::path dir = out_dir(cfg);
  const std::uint64_t hash = config_hash(ctx.scene(), cfg.encoder);

  std::ofstream csv(dir / "metrics.csv", std::ios::binary);
  if (!csv) throw std::runtime_error("cannot open " + (dir / "metrics.csv").string() + " for writing");
  csv << "# config_hash=" << hex64(hash) << '\n' << kCsvHeader << '\n';

  const auto on_row = [&](const MetricsRow& row) {
    csv << csv_row(row, cfg.deterministic) << '\n';
    if (row.mse) {
      log << "iter " << row.iter << "  loss " << format_real(double(row.loss), "%.6g") << "  mse "
          << format_real(*row.mse, "%.6g") << "  psnr " << format_real(*row.psnr, "%.2f") << '\n';
    }
  };
  const std::int64_t last = cfg.trainer.iterations;
  const auto on_image = [&](std::int64_t iter, const Image& image) {
    if (iter != last) write_ppm(image, dir / ("inference_" + std::to_string(iter) + ".ppm"));
  };
  TrainOutcome outcome = train_model(ctx, cfg, cfg.encoder, on_row, on_image);
  csv.close();
  if (!csv) throw std::runtime_error("failed writing metrics.csv");

  const std::filesystem::path ckpt = options.checkpoint.value_or(dir / "checkpoint.bin");
  if (ckpt.has_parent_path()) std::filesystem::create_directories(ckpt.parent_path());
  save_checkpoint(ckpt, outcome.model, outcome.state, hash);
  if (outcome.final_image) {
    write_ppm(*outcome.final_image, dir / "inference.ppm");
    write_ppm(cached_reference(ctx, cfg), dir / "reference.ppm");
  }
  log << "trained " << outcome.rows.size() << " iterations, checkpoint " << ckpt.string() << '\n';
  return outcome;
}

void cmd_render(const RunConfig& cfg, const std::filesystem::path& checkpoint, bool reference, std::ostream& out) {
  const RunContext ctx = make_context(cfg);
  const LoadedCheckpoint loaded =
      load_checkpoint(checkpoint, ctx.scene(), cfg.encoder, config_hash(ctx.scene(), cfg.encoder));
  const std::filesystem::path dir = out_dir(cfg);
  const Image image = render_inference(*ctx.bvh, ctx.camera(), loaded.model);
  write_ppm(image, dir / "render.ppm");
  if (reference) {
    const Image ref = cached_reference(ctx, cfg);
    write_ppm(ref, dir / "reference.ppm");
    const double m = mse(image, ref);
    out << "mse=" << format_real(m, "%.9g") << " psnr=" << format_real(psnr_from_mse(m), "%.4f") << '\n';
  }
}

json cmd_compare(const RunConfig& cfg, std::ostream& log) {
  if (cfg.encoder.kind != EncoderKind::Gate) throw std::invalid_argument("compare needs a gate encoder config");
  const RunContext ctx = make_context(cfg);
  const std::filesystem::path dir = out_dir(cfg);

  const Model probe(ctx.scene(), cfg.encoder, 0);
  EncoderConfig baseline = cfg.baseline;
  if (cfg.auto_table_size) {
    baseline.hash.table_size = match_table_size(baseline.hash, probe.encoder_parameter_count());
  }

  json report;
  report["config_hash"] = hex64(config_hash(ctx.scene(), cfg.encoder));
  report["iterations"] = cfg.trainer.iterations;
  report["seed"] = cfg.seed;
  report["auto_table_size"] = cfg.auto_table_size;
  std::size_t params[2] = {0, 0};
  const EncoderConfig* encoders[2] = {&cfg.encoder, &baseline};
  const char* names[2] = {"gate", "hashgrid"};
  for (int k = 0; k < 2; ++k) {
    log << "training " << names[k] << "...\n";
    const TrainOutcome t = train_model(ctx, cfg, *encoders[k]);
    double ms_train = 0, ms_render = 0;
    int renders = 0;
    for (const MetricsRow& r : t.rows) {
      ms_train += r.ms_train;
      if (r.mse) {
        ms_render += r.ms_render;
        ++renders;
      }
    }
    params[k] = t.model.encoder_parameter_count();
    json m;
    m["encoder"] = encoder_to_json(*encoders[k]);
    m["config_hash"] = hex64(t.config_hash);
    m["param_count"] = params[k];
    m["mlp_param_count"] = t.model.mlp.parameter_count();
    m["bytes"] = t.model.encoder_bytes();
    m["iterations"] = t.rows.size();
    m["final_loss"] = t.rows.empty() ? 0.0 : double(t.rows.back().loss);
    m["final_mse"] = t.final_mse;
    m["final_psnr"] = t.final_psnr;
    m["ms_per_iteration"] = cfg.deterministic || t.rows.empty() ? 0.0 : ms_train / double(t.rows.size());
    m["ms_per_render"] = cfg.deterministic || renders == 0 ? 0.0 : ms_render / renders;
    report["methods"][names[k]] = m;
    if (t.final_image) write_ppm(*t.final_image, dir / (std::string("compare_") + names[k] + ".ppm"));
    log << names[k] << ": params " << params[k] << ", mse " << format_real(t.final_mse, "%.6g") << '\n';
  }
  report["param_ratio"] = params[0] == 0 ? 0.0 : double(params[1]) / double(params[0]);
  if (cfg.trainer.iterations > 0) write_ppm(cached_reference(ctx, cfg), dir / "reference.ppm");
  write_json(report, dir / "compare_report.json");
  return report;
}

json cmd_viz(const RunConfig& cfg) {
  if (cfg.encoder.kind != EncoderKind::Gate) throw std::invalid_argument("viz needs a gate encoder config");
  const RunContext ctx = make_context(cfg);
  const std::filesystem::path dir = out_dir(cfg);
  const FeatureLayout layout = build_layout(ctx.scene(), cfg.encoder.resolution, cfg.encoder.storage);
  write_ppm(render_voronoi(*ctx.bvh, ctx.camera(), layout), dir / "voronoi.ppm");
  json stats = layout.stats_json();
  stats["config_hash"] = hex64(config_hash(ctx.scene(), cfg.encoder));
  write_json(stats, dir / "layout_stats.json");
  return stats;
}

json cmd_stats(const RunConfig& cfg) {
  const RunContext ctx = make_context(cfg);
  const Scene& scene = ctx.scene();
  const std::vector<Real> normalized = mesh_mean_normalized_areas(scene);
  json j;
  j["config_hash"] = hex64(config_hash(scene, cfg.encoder));
  j["triangles"] = scene.triangle_count();
  j["meshes"] = json::array();
  for (std::uint32_t m = 0; m < scene.mesh_count(); ++m) {
    const Mesh& mesh = scene.mesh(m);
    const double area = double(mesh_surface_area(mesh));
    json e;
    e["name"] = mesh.name;
    e["triangles"] = mesh.triangle_count();
    e["vertices"] = mesh.vertices.size();
    e["area"] = area;
    e["mean_triangle_area"] = area / double(mesh.triangle_count());
    e["A"] = double(normalized[m]);
    json rs = json::array();
    if (cfg.encoder.kind == EncoderKind::Gate) {
      for (const ResolutionLevel& l : cfg.encoder.resolution.levels) {
        if (l.kind == ResolutionLevel::Kind::Adaptive) rs.push_back(adaptive_resolution(normalized[m], l.r_scale));
      }
    }
    if (rs.empty()) rs.push_back(adaptive_resolution(normalized[m], 1));
    e["adaptive_R"] = rs;
    j["meshes"].push_back(e);
  }
  write_json(j, out_dir(cfg) / "stats.json");
  return j;
}

GATE_NAMESPACE_END
