// Acceptance run: one PASS/FAIL line per criterion. Usage:
//   gate_acceptance [output_dir] [criterion numbers...]
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "acceptance.hpp"
#include "gate/commands.hpp"
#include "gate/parallel.hpp"

using namespace gate;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path g_out = "acceptance_out";

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Scene scene_of(Mesh m) {
  Scene s;
  s.add_mesh(std::move(m));
  return s;
}

// Jittered grid with a random subset of its triangles; unused vertices dropped.
Mesh random_mesh(Pcg32& rng, const std::string& name = "random") {
  const int n = 2 + int(rng.next() % 3);
  Mesh grid = make_grid_quad(n);
  for (Vec3& v : grid.vertices) v.z = rng.uniform(Real(-0.1), Real(0.1));
  Mesh m;
  m.name = name;
  std::vector<Triangle> kept;
  for (const Triangle& t : grid.indices) {
    if (rng.uniform() < Real(0.75)) kept.push_back(t);
  }
  if (kept.empty()) kept.push_back(grid.indices.front());
  std::map<std::uint32_t, std::uint32_t> remap;
  for (Triangle& t : kept) {
    for (auto& idx : t) {
      auto [it, inserted] = remap.try_emplace(idx, std::uint32_t(m.vertices.size()));
      if (inserted) m.vertices.push_back(grid.vertices[idx]);
      idx = it->second;
    }
  }
  m.indices = kept;
  return m;
}

Barycentric random_bary(Pcg32& rng) {
  Real a = rng.uniform(), b = rng.uniform();
  if (a + b > 1) {
    a = 1 - a;
    b = 1 - b;
  }
  return {1 - a - b, a, b};
}

ResolutionConfig levels_of(std::vector<ResolutionLevel> levels, int features) {
  ResolutionConfig cfg;
  cfg.levels = std::move(levels);
  cfg.features_per_level = features;
  return cfg;
}

// ---------------------------------------------------------------------------

Outcome c1_partition_of_unity() {
  Pcg32 rng(101);
  const Scene scene = scene_of(make_icosphere(1, 1, {0, 0, 0}));
  std::vector<FeatureLayout> layouts;
  for (int r : {1, 2, 3, 5, 8, 13, 32}) {
    layouts.push_back(build_layout(scene, levels_of({ResolutionLevel::fixed(r)}, 2), StorageMode::Shared));
  }
  double worst = 0;
  bool negative = false;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const FeatureLayout& layout = layouts[std::size_t(i) % layouts.size()];
    SurfacePoint p;
    p.tri_id = rng.next() % std::uint32_t(scene.triangle_count());
    p.bary = random_bary(rng);
    if (i % 10 == 0) {  // exactly on an edge or a vertex
      const int c = int(rng.next() % 3);
      p.bary[std::size_t(c)] = 0;
      const Real s = p.bary[0] + p.bary[1] + p.bary[2];
      if (s == 0) {
        p.bary = {0, 0, 0};
        p.bary[std::size_t((c + 1) % 3)] = 1;
      } else {
        for (Real& b : p.bary) b /= s;
      }
    }
    const LookupResult r = layout.resolve(0, p);
    double sum = 0;
    for (Real w : r.weights) {
      negative |= w < 0;
      sum += double(w);
    }
    worst = std::max(worst, std::abs(sum - 1));
  }
  return {!negative && worst <= 1e-6,
          "10^5 resolves over R in {1..32}: max |sum-1| = " + fmt("%.2e", worst) +
              (negative ? ", NEGATIVE weight found" : ", all weights >= 0")};
}

Outcome c2_seam_continuity() {
  Pcg32 rng(202);
  const Scene scene = scene_of(make_icosphere(2, 1, {0, 0, 0}));
  const Mesh& mesh = scene.mesh(0);
  const FeatureLayout layout = build_layout(
      scene, levels_of({ResolutionLevel::fixed(5), ResolutionLevel::fixed(2)}, 3), StorageMode::Shared);
  FeatureStore store = init_features(layout, 7);
  for (Real& v : store.values) v = rng.uniform(-1, 1);

  const Adjacency adj = build_adjacency(mesh);
  std::vector<std::pair<EdgeKey, std::vector<EdgeUse>>> shared;
  for (const auto& [key, uses] : adj.edges) {
    if (uses.size() == 2) shared.emplace_back(key, uses);
  }
  if (shared.empty()) return {false, "fixture has no shared edges"};

  auto point_on = [&](const EdgeKey& key, const EdgeUse& use, Real t) {
    SurfacePoint p;
    p.tri_id = use.tri;
    p.bary = {0, 0, 0};
    for (int c = 0; c < 3; ++c) {
      const std::uint32_t v = mesh.indices[use.tri][std::size_t(c)];
      if (v == key.lo) p.bary[std::size_t(c)] = 1 - t;
      if (v == key.hi) p.bary[std::size_t(c)] = t;
    }
    return p;
  };
  double worst = 0, worst_position = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto& [key, uses] = shared[rng.next() % shared.size()];
    const Real t = rng.uniform();
    const SurfacePoint a = point_on(key, uses[0], t);
    const SurfacePoint b = point_on(key, uses[1], t);
    worst_position = std::max(worst_position, double(length(surface_position(scene, a) - surface_position(scene, b))));
    const auto za = gate_encode(store, layout, a);
    const auto zb = gate_encode(store, layout, b);
    for (std::size_t k = 0; k < za.size(); ++k) worst = std::max(worst, double(std::abs(za[k] - zb[k])));
  }
  return {worst <= 1e-6, "10^3 points on " + std::to_string(shared.size()) +
                             " shared edges of a closed icosphere, levels R=5,2: max |z_a - z_b| = " +
                             fmt("%.2e", worst) + " (position gap " + fmt("%.1e", worst_position) + ")"};
}

Outcome c3_count_identities() {
  Pcg32 rng(303);
  bool ok = true;
  int flat_checks = 0, shared_checks = 0;
  using Key = std::tuple<long, long, long>;
  for (int trial = 0; trial < 20; ++trial) {
    Scene scene;
    scene.add_mesh(random_mesh(rng, "a"));
    Mesh second = random_mesh(rng, "b");
    for (Vec3& v : second.vertices) v = v * Real(3) + Vec3{5, 0, 0};
    scene.add_mesh(second);

    // Flat: every triangle owns its full lattice.
    const int r1 = 1 + int(rng.next() % 8), r2 = 1 + int(rng.next() % 8);
    const FeatureLayout flat = build_layout(
        scene, levels_of({ResolutionLevel::fixed(r1), ResolutionLevel::fixed(r2)}, 2), StorageMode::Flat);
    std::uint64_t expected = 0;
    for (int r : {r1, r2}) expected += scene.triangle_count() * std::uint64_t((r + 1) * (r + 2) / 2);
    ok &= flat.total_slots() == expected;
    ++flat_checks;

    // Shared: one slot per distinct lattice position within each mesh.
    for (int r : {1, 2, 3, 4, 8}) {
      const FeatureLayout layout = build_layout(scene, levels_of({ResolutionLevel::fixed(r)}, 2), StorageMode::Shared);
      std::uint64_t positions = 0;
      for (std::uint32_t m = 0; m < scene.mesh_count(); ++m) {
        const Mesh& mesh = scene.mesh(m);
        std::set<Key> seen;
        for (std::uint32_t t = 0; t < mesh.triangle_count(); ++t) {
          for (int j = 0; j <= r; ++j) {
            for (int i = 0; i + j <= r; ++i) {
              // Lattice position computed directly from the corners.
              const double b1 = double(i) / r, b2 = double(j) / r, b0 = 1 - b1 - b2;
              const Vec3 p0 = mesh.corner(t, 0), p1 = mesh.corner(t, 1), p2 = mesh.corner(t, 2);
              const double x = b0 * p0.x + b1 * p1.x + b2 * p2.x;
              const double y = b0 * p0.y + b1 * p1.y + b2 * p2.y;
              const double z = b0 * p0.z + b1 * p1.z + b2 * p2.z;
              seen.insert({std::lround(x * 1e5), std::lround(y * 1e5), std::lround(z * 1e5)});
            }
          }
        }
        positions += seen.size();
      }
      ok &= layout.total_slots() == positions;
      ++shared_checks;
    }
  }
  return {ok, std::to_string(flat_checks) + " Flat totals and " + std::to_string(shared_checks) +
                  " Shared totals (20 random two-mesh scenes x R in {1,2,3,4,8}) " +
                  (ok ? "all match" : "MISMATCH")};
}

Outcome c4_gradient_exactness() {
  Pcg32 rng(404);
  double worst = 0;
  bool structure_ok = true;
  for (int trial = 0; trial < 1000; ++trial) {
    Scene scene;
    scene.add_mesh(random_mesh(rng));
    if (rng.uniform() < Real(0.5)) {
      Mesh small = random_mesh(rng, "small");
      for (Vec3& v : small.vertices) v = v * Real(0.2) + Vec3{3, 0, 0};
      scene.add_mesh(small);
    }
    const int levels = 1 + int(rng.next() % 3);
    const int features = 1 + int(rng.next() % 8);
    std::vector<ResolutionLevel> lv;
    for (int l = 0; l < levels; ++l) {
      lv.push_back(rng.uniform() < Real(0.3) ? ResolutionLevel::adaptive(rng.uniform(Real(0.1), Real(1)))
                                             : ResolutionLevel::fixed(1 + int(rng.next() % 8)));
    }
    const StorageMode mode = rng.uniform() < Real(0.5) ? StorageMode::Shared : StorageMode::Flat;
    const FeatureLayout layout = build_layout(scene, levels_of(lv, features), mode);

    SurfacePoint p;
    p.mesh_id = rng.next() % std::uint32_t(scene.mesh_count());
    p.tri_id = rng.next() % std::uint32_t(scene.mesh(p.mesh_id).triangle_count());
    p.bary = random_bary(rng);
    std::vector<Real> dl(std::size_t(levels * features));
    for (Real& g : dl) g = rng.uniform(-1, 1);

    // w_t * dL/dz from the micro-triangle weights of every level.
    std::map<std::uint32_t, std::vector<Real>> expected;
    for (int l = 0; l < levels; ++l) {
      const int r = layout.resolution(std::size_t(l), p.mesh_id);
      const LatticeLocation loc = locate(p.bary, r);
      for (int k = 0; k < 3; ++k) {
        const std::uint32_t slot = layout.slot_of(std::size_t(l), p.mesh_id, p.tri_id, loc.points[std::size_t(k)]);
        auto& e = expected[slot];
        e.resize(std::size_t(features), 0);
        for (int f = 0; f < features; ++f) {
          e[std::size_t(f)] += loc.weights[std::size_t(k)] * dl[std::size_t(l * features + f)];
        }
      }
    }
    const std::vector<GradientRecord> records = gate_backward(layout, p, dl);
    structure_ok &= records.size() == expected.size();
    for (const GradientRecord& rec : records) {
      const auto it = expected.find(rec.slot);
      if (it == expected.end()) {
        structure_ok = false;
        continue;
      }
      for (int f = 0; f < features; ++f) {
        worst = std::max(worst, double(std::abs(rec.grad[std::size_t(f)] - it->second[std::size_t(f)])));
      }
    }
  }
  return {structure_ok && worst == 0, "10^3 random (mesh, levels, L, storage, point) configurations: max |analytic - w*dL/dz| = " +
                                          fmt("%.1e", worst) + (structure_ok ? "" : ", slot sets DIFFER")};
}

Outcome c5_gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  const acceptance::GradientCheckReport d = acceptance::gradient_check_f64(1e-5, 1e-4);
  const acceptance::GradientCheckReport s = acceptance::gradient_check_f32(5e-2, 1e-2);
  const double total = seconds_since(t0);
  const bool ok = d.worst_relative_error < 1e-6 && s.worst_relative_error < 1e-3 && d.untouched_slots_constant &&
                  s.untouched_slots_constant && total < 30;
  std::ostringstream msg;
  msg << "64-bit: " << d.mlp_parameters << " MLP + " << d.feature_values
      << " feature values, max rel err " << fmt("%.2e", d.worst_relative_error) << " (h=1e-5, " << d.shrunk_steps
      << " near a kink); 32-bit: max rel err " << fmt("%.2e", s.worst_relative_error) << " (h=5e-2, " << s.shrunk_steps
      << " near a kink); untouched slots inert: " << (d.untouched_slots_constant && s.untouched_slots_constant ? "yes" : "NO")
      << "; " << fmt("%.1f", total) << " s";
  return {ok, msg.str()};
}

Outcome c6_sparse_adam() {
  const Fixture fx = make_quad_fixture(8);
  EncoderConfig enc = EncoderConfig::gate_default();
  enc.resolution.levels = {ResolutionLevel::fixed(4), ResolutionLevel::fixed(1)};
  Model model(fx.scene, enc, 31);
  const FeatureStore initial = model.features;
  TriangleTrainState state(fx.scene.triangle_count());
  const AreaSampler sampler(fx.scene);
  TrainerConfig cfg;
  cfg.batch_size = 64;
  const TargetOracle oracle = [](const QueryPoint& q, Pcg32&) {
    return Real(0.5) + Real(0.5) * std::sin(6 * q.position.x) * std::cos(5 * q.position.y);
  };

  const std::size_t f = std::size_t(model.features.features);
  std::map<std::uint32_t, std::vector<std::array<Real, kMaxFeatures>>> history;
  bool untouched_identical = true;
  for (int it = 1; it <= 40; ++it) {
    const auto batch = build_batch(state, fx.scene, sampler, oracle, cfg, 77, it);
    const Gradients g = compute_gradients(model, batch);
    const FeatureStore before = model.features;
    apply_gradients(model, g, cfg.adam);
    update_counters(state, fx.scene, batch, it);
    std::vector<bool> touched(model.features.slot_count(), false);
    for (const GradientRecord& r : g.features) {
      touched[r.slot] = true;
      history[r.slot].push_back(r.grad);
    }
    for (std::uint32_t s = 0; s < model.features.slot_count(); ++s) {
      if (touched[s]) continue;
      const std::size_t o = std::size_t(s) * f;
      untouched_identical &=
          std::memcmp(&model.features.values[o], &before.values[o], f * sizeof(Real)) == 0 &&
          std::memcmp(&model.features.adam_m[o], &before.adam_m[o], f * sizeof(Real)) == 0 &&
          std::memcmp(&model.features.adam_v[o], &before.adam_v[o], f * sizeof(Real)) == 0 &&
          model.features.slot_step_count[s] == before.slot_step_count[s];
    }
  }

  double worst = 0;
  bool counts_ok = true;
  for (const auto& [slot, grads] : history) {
    const std::size_t o = std::size_t(slot) * f;
    std::vector<Real> p(initial.values.begin() + std::ptrdiff_t(o), initial.values.begin() + std::ptrdiff_t(o + f));
    std::vector<Real> m(f, 0), v(f, 0);
    for (std::size_t t = 0; t < grads.size(); ++t) {
      adam_step_dense(p, std::span<const Real>(grads[t].data(), f), m, v, t + 1, cfg.adam);
    }
    for (std::size_t k = 0; k < f; ++k) worst = std::max(worst, double(std::abs(p[k] - model.features.values[o + k])));
    counts_ok &= model.features.slot_step_count[slot] == grads.size();
  }
  return {worst <= 1e-6 && untouched_identical && counts_ok,
          std::to_string(history.size()) + " slots replayed over 40 iterations: max |sparse - dense| = " +
              fmt("%.2e", worst) + "; untouched slots bit-identical: " + (untouched_identical ? "yes" : "NO") +
              "; step counts " + (counts_ok ? "match" : "DIFFER")};
}

Outcome c7_sampling_law() {
  // Resampling step over one candidate on each triangle.
  const std::vector<Real> w{candidate_weight(1, 512), candidate_weight(512, 512)};
  Pcg32 rng(707);
  const int n = 100000;
  int rare = 0;
  for (int i = 0; i < n; ++i) rare += resample_index(w, rng.uniform()) == 1;
  const double p = 1.0 / 513;
  const double sigma = std::sqrt(n * p * (1 - p));
  const double z = (rare - n * p) / sigma;

  // Same law through select_sample on a two-triangle equal-area mesh (M = 2):
  // with one candidate per triangle the (1, 512) pair is resolved 512:1,
  // with both candidates on one triangle it wins outright.
  const Scene scene = scene_of(make_grid_quad(1));
  const AreaSampler sampler(scene);
  TriangleTrainState state(2);
  state.steps = {1, 512};
  TrainerConfig cfg;
  cfg.candidates = 2;
  const double expected = 0.25 + 0.5 * (512.0 / 513.0);
  int first = 0;
  for (int i = 0; i < n; ++i) first += select_sample(state, scene, sampler, cfg, rng).tri_id == 0;
  const double sigma2 = std::sqrt(n * expected * (1 - expected));
  const double z2 = (first - n * expected) / sigma2;

  // Seven samples on one triangle in one iteration count once.
  TriangleTrainState counters(2);
  std::vector<TrainingSample> batch(7);
  for (auto& s : batch) s.query.point = sample_surface_point(0, 1, Real(0.2), Real(0.3));
  update_counters(counters, scene, batch, 1);
  const bool once = counters.steps[1] == 1 && counters.steps[0] == 0;

  const double ratio = double(n - rare) / std::max(1, rare);
  return {std::abs(z) <= 3 && std::abs(z2) <= 3 && once,
          "selection ratio " + fmt("%.1f", ratio) + ":1 (" + fmt("%+.2f", z) + " sigma from 512:1); select_sample M=2 " +
              fmt("%+.2f", z2) + " sigma from the exact law; 7 samples -> counter +" +
              std::to_string(counters.steps[1])};
}

Outcome c8_convergence() {
  const unsigned saved = thread_count();
  set_thread_count(1);
  const auto t0 = std::chrono::steady_clock::now();
  const Fixture fx = make_quad_fixture(16);
  EncoderConfig enc = EncoderConfig::gate_default();
  enc.resolution.levels = {ResolutionLevel::fixed(8)};
  enc.resolution.features_per_level = 2;
  Model model(fx.scene, enc, 8);
  TriangleTrainState state(fx.scene.triangle_count());
  auto f = [](const Vec3& p) {
    return Real(0.5) + Real(0.5) * std::sin(4 * kPi * p.x) * std::sin(4 * kPi * p.y);
  };
  const TargetOracle oracle = [&](const QueryPoint& q, Pcg32&) { return f(q.position); };

  const AreaSampler sampler(fx.scene);
  Pcg32 rng(808);
  std::vector<QueryPoint> eval;
  std::vector<Real> truth;
  for (int i = 0; i < 10000; ++i) {
    const auto [m, t] = fx.scene.split_global(sampler.sample(rng.uniform()));
    const Real u1 = rng.uniform();
    const Real u2 = rng.uniform();
    eval.push_back(make_query(fx.scene, sample_surface_point(m, t, u1, u2)));
    truth.push_back(f(eval.back().position));
  }
  auto surface_mse = [&] {
    const auto pred = model.predict(eval);
    double s = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += double(pred[i] - truth[i]) * double(pred[i] - truth[i]);
    return s / double(pred.size());
  };

  TrainLoopOptions opt;
  opt.trainer.batch_size = 1024;
  opt.trainer.iterations = 100;
  opt.seed = 8;
  double mse = surface_mse();
  int iters = 0;
  while (iters < 2000 && mse >= 1e-3) {
    train_loop(model, state, fx.scene, oracle, opt);
    iters += opt.trainer.iterations;
    mse = surface_mse();
  }
  const double secs = seconds_since(t0);
  set_thread_count(saved);
  return {mse < 1e-3 && secs < 120, "surface MSE " + fmt("%.2e", mse) + " after " + std::to_string(iters) +
                                        " iterations (512 triangles, R=8, L=2, batch 1024), " + fmt("%.1f", secs) +
                                        " s on 1 thread"};
}

RunConfig nao_config(const std::string& fixture, const std::string& sub) {
  RunConfig cfg;
  cfg.fixture = fixture;
  cfg.out = (g_out / sub).string();
  cfg.seed = 1;
  cfg.deterministic = true;
  return cfg;
}

Outcome c9_error_vs_steps() {
  RunConfig cfg = nao_config("corner", "c9");
  cfg.trainer.iterations = 128;
  cfg.eval_every = 8;
  const RunContext ctx = make_context(cfg);
  const TrainOutcome t = train_model(ctx, cfg, cfg.encoder);
  std::map<std::int64_t, double> mse;
  for (const MetricsRow& r : t.rows) {
    if (r.mse) mse[r.iter] = *r.mse;
  }
  const double m8 = mse.at(8), m32 = mse.at(32), m128 = mse.at(128);
  return {m128 < m32 && m32 < m8, "corner image MSE: " + fmt("%.5f", m8) + " @8 > " + fmt("%.5f", m32) + " @32 > " +
                                      fmt("%.5f", m128) + " @128"};
}

Outcome c10_stadium() {
  RunConfig cfg = nao_config("stadium", "c10");
  cfg.trainer.iterations = 512;
  std::ostringstream log;
  const nlohmann::json report = cmd_compare(cfg, log);
  const double ratio = report["param_ratio"].get<double>();
  const double g = report["methods"]["gate"]["final_mse"].get<double>();
  const double h = report["methods"]["hashgrid"]["final_mse"].get<double>();
  const bool same_iters = report["methods"]["gate"]["iterations"] == report["methods"]["hashgrid"]["iterations"];
  return {ratio >= 0.9 && ratio <= 1.1 && g <= h && same_iters,
          "512 iterations, params " + report["methods"]["gate"]["param_count"].dump() + " vs " +
              report["methods"]["hashgrid"]["param_count"].dump() + " (ratio " + fmt("%.3f", ratio) + "): GATE MSE " +
              fmt("%.5f", g) + " vs hash grid " + fmt("%.5f", h) + "; report " +
              (fs::path(cfg.out) / "compare_report.json").string()};
}

Outcome c11_adaptive_economy() {
  RunConfig cfg = nao_config("mixed", "c11");
  cfg.trainer.iterations = 256;
  const RunContext ctx = make_context(cfg);
  int r_max = 1;
  for (int r : level_resolutions(ctx.scene(), ResolutionLevel::adaptive(1))) r_max = std::max(r_max, r);
  EncoderConfig adaptive = cfg.encoder;
  adaptive.resolution.levels = {ResolutionLevel::adaptive(1), ResolutionLevel::fixed(1)};
  EncoderConfig fixed = cfg.encoder;
  fixed.resolution.levels = {ResolutionLevel::fixed(r_max), ResolutionLevel::fixed(1)};
  const TrainOutcome a = train_model(ctx, cfg, adaptive);
  const TrainOutcome f = train_model(ctx, cfg, fixed);
  const double slots_a = double(a.model.features.slot_count()), slots_f = double(f.model.features.slot_count());
  return {slots_a <= 0.5 * slots_f && a.final_mse <= 1.25 * f.final_mse,
          "slots " + fmt("%.0f", slots_a) + " adaptive vs " + fmt("%.0f", slots_f) + " fixed R=" +
              std::to_string(r_max) + " (" + fmt("%.3f", slots_a / slots_f) + "x); MSE " + fmt("%.5f", a.final_mse) +
              " vs " + fmt("%.5f", f.final_mse) + " (" + fmt("%.3f", a.final_mse / f.final_mse) + "x)"};
}

Mesh plane(Real size, Real height, bool up) {
  Mesh m;
  m.name = up ? "floor" : "ceiling";
  const Real h = size / 2;
  m.vertices = {{-h, height, -h}, {h, height, -h}, {h, height, h}, {-h, height, h}};
  m.indices = up ? std::vector<Triangle>{{0, 2, 1}, {0, 3, 2}} : std::vector<Triangle>{{0, 1, 2}, {0, 2, 3}};
  return m;
}

Outcome c12_ao_sanity() {
  Pcg32 rng(1212);
  const Vec3 up{0, 1, 0};
  Real open = 1, closed = 0, beyond = 1;
  {
    const Scene s = scene_of(plane(4, 0, true));
    const Bvh bvh(s);
    for (int i = 0; i < 16; ++i) {
      open = std::min(open, ao_oracle(bvh, {rng.uniform(-2, 2), 0, rng.uniform(-2, 2)}, up, 1024, 100, rng));
    }
  }
  {
    const Scene s = scene_of(make_room({-1, 0, -1}, {1, 2, 1}));
    const Bvh bvh(s);
    for (int i = 0; i < 16; ++i) {
      closed = std::max(closed, ao_oracle(bvh, {rng.uniform(-1, 1), 0, rng.uniform(-1, 1)}, up, 1024, 100, rng));
    }
  }
  {
    Scene s;
    s.add_mesh(plane(100, 0, true));
    s.add_mesh(plane(100, 1, false));
    const Bvh bvh(s);
    for (int i = 0; i < 16; ++i) {
      beyond = std::min(beyond, ao_oracle(bvh, {rng.uniform(-5, 5), 0, rng.uniform(-5, 5)}, up, 1024, Real(0.95), rng));
    }
  }
  return {open == 1 && closed == 0 && beyond == 1, "open plane min " + fmt("%.4f", open) + ", closed box max " +
                                                       fmt("%.4f", closed) + ", planes 1 apart with max_dist 0.95 min " +
                                                       fmt("%.4f", beyond) + " (16 points x 1024 rays each)"};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome c13_determinism() {
  RunConfig cfg = nao_config("corner", "c13");
  cfg.trainer.iterations = 32;
  cfg.eval_every = 8;
  std::ostringstream log;
  cmd_train(cfg, {}, log);
  const std::string ckpt = slurp(fs::path(cfg.out) / "checkpoint.bin");
  const std::string csv = slurp(fs::path(cfg.out) / "metrics.csv");
  cmd_train(cfg, {}, log);
  const bool same_ckpt = slurp(fs::path(cfg.out) / "checkpoint.bin") == ckpt;
  const bool same_csv = slurp(fs::path(cfg.out) / "metrics.csv") == csv;
  return {same_ckpt && same_csv && !ckpt.empty(),
          "two deterministic train runs (32 iterations, " + std::to_string(thread_count()) + " thread(s)): checkpoint " +
              std::to_string(ckpt.size()) + " bytes " + (same_ckpt ? "identical" : "DIFFERS") + ", CSV " +
              (same_csv ? "identical" : "DIFFERS")};
}

struct PerfRun {
  Fixture fx;
  std::unique_ptr<Bvh> bvh;
  std::unique_ptr<Model> model;
  std::unique_ptr<TriangleTrainState> state;
  std::unique_ptr<AreaSampler> sampler;
  TargetOracle oracle;
  std::vector<double> step_ms, touched;
  double seconds = 0;  // setup, batches, steps and renders

  explicit PerfRun(int n) {
    const auto t0 = std::chrono::steady_clock::now();
    fx = make_corner_fixture(n);
    fx.camera.width = fx.camera.height = 256;
    bvh = std::make_unique<Bvh>(fx.scene);
    EncoderConfig enc = EncoderConfig::gate_default();
    enc.resolution.levels = {ResolutionLevel::fixed(4), ResolutionLevel::fixed(1)};
    model = std::make_unique<Model>(fx.scene, enc, 14);
    state = std::make_unique<TriangleTrainState>(fx.scene.triangle_count());
    sampler = std::make_unique<AreaSampler>(fx.scene);
    oracle = make_ao_oracle(*bvh, AoParams{});
    seconds += seconds_since(t0);
  }

  void iterate(std::int64_t it) {
    const auto t0 = std::chrono::steady_clock::now();
    TrainerConfig cfg;
    cfg.batch_size = 4096;
    const auto batch = build_batch(*state, fx.scene, *sampler, oracle, cfg, 5, it);
    const auto s0 = std::chrono::steady_clock::now();
    const IterationResult r = train_iteration(*model, *state, fx.scene, batch, cfg, it);
    step_ms.push_back(seconds_since(s0) * 1e3);
    touched.push_back(double(r.touched_slots));
    seconds += seconds_since(t0);
  }

  void render() {
    const auto t0 = std::chrono::steady_clock::now();
    const Image ref = render_reference(*bvh, fx.camera, AoParams{}, 3);
    const Image img = render_inference(*bvh, fx.camera, *model);
    seconds += seconds_since(t0);
    write_ppm(img, g_out / "c14_inference.ppm");
    write_ppm(ref, g_out / "c14_reference.ppm");
  }
};

double median(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + std::ptrdiff_t(v.size() / 2), v.end());
  return v[v.size() / 2];
}

Outcome c14_performance() {
  PerfRun a(112), b(159);
  // Interleaved so both scenes see the same machine state.
  for (std::int64_t it = 1; it <= 128; ++it) {
    a.iterate(it);
    b.iterate(it);
  }
  a.render();
  const double ma = median(a.step_ms), mb = median(b.step_ms);
  const double change = std::abs(mb - ma) / ma;
  std::ostringstream msg;
  msg << a.fx.scene.triangle_count() << " triangles: 128 iterations + 256x256 reference and inference in "
      << fmt("%.1f", a.seconds) << " s on " << thread_count() << " thread(s); train step median " << fmt("%.2f", ma)
      << " ms (" << a.model->features.slot_count() << " slots, " << fmt("%.0f", median(a.touched))
      << " touched) vs " << fmt("%.2f", mb) << " ms at " << b.fx.scene.triangle_count() << " triangles ("
      << b.model->features.slot_count() << " slots): change " << fmt("%.1f", 100 * change) << "%";
  return {a.seconds < 300 && change < 0.2, msg.str()};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (!arg.empty() && std::all_of(arg.begin(), arg.end(), ::isdigit)) {
      only.insert(std::stoi(arg));
    } else {
      g_out = arg;
    }
  }
  fs::create_directories(g_out);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"partition of unity", c1_partition_of_unity},
      {"seam continuity", c2_seam_continuity},
      {"count identities", c3_count_identities},
      {"feature gradient exactness", c4_gradient_exactness},
      {"full-pipeline gradient check", c5_gradient_check},
      {"sparse Adam correctness", c6_sparse_adam},
      {"sampling law", c7_sampling_law},
      {"convergence fixture", c8_convergence},
      {"error vs steps", c9_error_vs_steps},
      {"teapot in a stadium", c10_stadium},
      {"adaptive-resolution economy", c11_adaptive_economy},
      {"AO oracle sanity", c12_ao_sanity},
      {"determinism", c13_determinism},
      {"performance smoke", c14_performance},
  };
  int failed = 0, run = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = int(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    ++run;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  %2d  %-30s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", run - failed, run);
  return failed == 0 ? 0 : 1;
}
