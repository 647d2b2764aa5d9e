#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"

#include "gate/fixtures.hpp"
#include "gate/parallel.hpp"
#include "gate/training.hpp"

using namespace gate;

namespace {

// Two triangles of equal area (the unit square split along its diagonal).
Scene two_triangles() {
  Scene scene;
  scene.add_mesh(make_grid_quad(1));
  return scene;
}

// Fan of four triangles with areas 1 : 2 : 3 : 4.
Scene unequal_fan() {
  Mesh m;
  m.name = "fan";
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {1, 3, 0}, {1, 6, 0}, {1, 10, 0}};
  m.indices = {{0, 1, 2}, {0, 2, 3}, {0, 3, 4}, {0, 4, 5}};
  Scene scene;
  scene.add_mesh(m);
  return scene;
}

Real smooth_target(const QueryPoint& q) {
  return Real(0.5) + Real(0.4) * std::sin(Real(3) * q.position.x) * std::cos(Real(2) * q.position.y);
}

TargetOracle smooth_oracle() {
  return [](const QueryPoint& q, Pcg32&) { return smooth_target(q); };
}

EncoderConfig small_gate(int r) {
  EncoderConfig e = EncoderConfig::gate_default();
  e.resolution.levels = {ResolutionLevel::fixed(r)};
  return e;
}

double binomial(int n, int k) {
  double c = 1;
  for (int i = 1; i <= k; ++i) c = c * double(n - k + i) / double(i);
  return c;
}

}  // namespace

TEST_CASE("candidate weight") {
  CHECK(candidate_weight(0, 512) == 1);
  CHECK(candidate_weight(1, 512) == 1);
  CHECK(candidate_weight(2, 512) == Real(0.5));
  CHECK(candidate_weight(512, 512) == Real(1) / 512);
  CHECK(candidate_weight(10000, 512) == Real(1) / 512);
}

TEST_CASE("resampling follows normalized weights") {
  const std::vector<Real> w{candidate_weight(1, 512), candidate_weight(512, 512)};
  CHECK(resample_index(w, Real(0)) == 0);
  CHECK(resample_index(w, Real(0.99)) == 0);
  CHECK(resample_index(w, Real(0.999)) == 1);
  CHECK(resample_index(std::vector<Real>{1, 1, 1, 1}, Real(0.6)) == 2);
  CHECK_THROWS(resample_index(std::vector<Real>{}, Real(0.5)));

  Pcg32 rng(77);
  const int n = 100000;
  int low = 0;
  for (int i = 0; i < n; ++i) low += resample_index(w, rng.uniform()) == 1;
  const double p = 1.0 / 513;
  const double sigma = std::sqrt(n * p * (1 - p));
  CHECK(std::abs(low - n * p) <= 3 * sigma);
}

TEST_CASE("select_sample with counts (1, 512) matches the exact mixture law") {
  const Scene scene = two_triangles();
  const AreaSampler sampler(scene);
  TriangleTrainState state(2);
  state.steps = {1, 512};
  TrainerConfig cfg;
  cfg.candidates = 2;
  for (int m : {2, 16}) {
    cfg.candidates = m;
    // k of the m candidates land on triangle 0 with probability C(m,k)/2^m.
    double expected = 0;
    for (int k = 0; k <= m; ++k) {
      const double wa = k * 1.0, wb = (m - k) / 512.0;
      expected += binomial(m, k) / std::pow(2.0, m) * (wa / (wa + wb));
    }
    Pcg32 rng{std::uint64_t(m)};
    const int n = 100000;
    int hits = 0;
    for (int i = 0; i < n; ++i) hits += select_sample(state, scene, sampler, cfg, rng).tri_id == 0;
    const double sigma = std::sqrt(n * expected * (1 - expected));
    CHECK(std::abs(hits - n * expected) <= 3 * sigma);
  }
}

TEST_CASE("equal counts give area-proportional selection") {
  const Scene scene = unequal_fan();
  const AreaSampler sampler(scene);
  for (std::size_t t = 0; t < 4; ++t) CHECK(sampler.probability(t) == doctest::Approx(double(t + 1) / 10));
  TriangleTrainState state(4);
  state.steps = {5, 5, 5, 5};
  TrainerConfig cfg;
  Pcg32 rng(3);
  const int n = 100000;
  std::array<int, 4> counts{};
  for (int i = 0; i < n; ++i) ++counts[select_sample(state, scene, sampler, cfg, rng).tri_id];
  double chi2 = 0;
  for (int t = 0; t < 4; ++t) {
    const double e = n * (t + 1) / 10.0;
    chi2 += (counts[std::size_t(t)] - e) * (counts[std::size_t(t)] - e) / e;
  }
  CHECK(chi2 < 11.345);  // chi-square, 3 dof, p = 0.01

  // Without prioritization the counts are ignored.
  state.steps = {1, 512, 512, 512};
  cfg.prioritize = false;
  counts = {};
  for (int i = 0; i < n; ++i) ++counts[select_sample(state, scene, sampler, cfg, rng).tri_id];
  chi2 = 0;
  for (int t = 0; t < 4; ++t) {
    const double e = n * (t + 1) / 10.0;
    chi2 += (counts[std::size_t(t)] - e) * (counts[std::size_t(t)] - e) / e;
  }
  CHECK(chi2 < 11.345);
}

TEST_CASE("area sampler") {
  Mesh flat = make_grid_quad(1);
  flat.vertices[2] = flat.vertices[1];
  flat.vertices[3] = flat.vertices[1];
  Scene degenerate;
  degenerate.add_mesh(flat);
  CHECK_THROWS(AreaSampler{degenerate});
  const AreaSampler s(unequal_fan());
  CHECK(s.total_area() == doctest::Approx(5));
  CHECK(s.sample(Real(0)) == 0);
  CHECK(s.sample(Real(0.15)) == 1);
  CHECK(s.sample(std::nextafter(Real(1), Real(0))) == 3);
}

TEST_CASE("batch construction") {
  const Fixture fx = make_quad_fixture(8);
  const AreaSampler sampler(fx.scene);
  TriangleTrainState state(fx.scene.triangle_count());
  TrainerConfig cfg;
  cfg.batch_size = 1024;
  const TargetOracle oracle = smooth_oracle();

  SUBCASE("groups share a triangle and the first point is the selected candidate") {
    const auto batch = build_batch(state, fx.scene, sampler, oracle, cfg, 5, 1);
    REQUIRE(batch.size() == 1024);
    for (std::size_t r = 0; r < 256; ++r) {
      const SurfacePoint& first = batch[r * 4].query.point;
      for (std::size_t g = 1; g < 4; ++g) {
        CHECK(batch[r * 4 + g].query.point.tri_id == first.tri_id);
        CHECK(batch[r * 4 + g].query.point != first);
      }
      Pcg32 rng(derive_seed(5, 1, r));
      CHECK(select_sample(state, fx.scene, sampler, cfg, rng) == first);
    }
    for (const TrainingSample& s : batch) CHECK(s.target == smooth_target(s.query));
  }

  SUBCASE("G = 1 and G = B") {
    cfg.group_size = 1;
    auto batch = build_batch(state, fx.scene, sampler, oracle, cfg, 5, 1);
    CHECK(batch.size() == 1024);
    std::set<std::uint32_t> tris;
    for (const auto& s : batch) tris.insert(s.query.point.tri_id);
    CHECK(tris.size() > 64);
    cfg.group_size = 1024;
    batch = build_batch(state, fx.scene, sampler, oracle, cfg, 5, 1);
    tris.clear();
    for (const auto& s : batch) tris.insert(s.query.point.tri_id);
    CHECK(tris.size() == 1);
    cfg.group_size = 3;
    CHECK_THROWS(build_batch(state, fx.scene, sampler, oracle, cfg, 5, 1));
  }

  SUBCASE("deterministic and independent of the thread count") {
    const auto a = build_batch(state, fx.scene, sampler, oracle, cfg, 5, 2);
    const unsigned saved = thread_count();
    set_thread_count(3);
    const auto b = build_batch(state, fx.scene, sampler, oracle, cfg, 5, 2);
    set_thread_count(saved);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].query.point == b[i].query.point);
      CHECK(a[i].target == b[i].target);
    }
    const auto c = build_batch(state, fx.scene, sampler, oracle, cfg, 5, 3);
    CHECK(c[0].query.point != a[0].query.point);
  }
}

TEST_CASE("counters increase once per iteration") {
  const Scene scene = two_triangles();
  TriangleTrainState state(2);
  std::vector<TrainingSample> batch(7);
  for (auto& s : batch) s.query.point = sample_surface_point(0, 1, Real(0.3), Real(0.3));
  update_counters(state, scene, batch, 1);
  CHECK(state.steps == std::vector<std::uint32_t>{0, 1});
  CHECK(state.last_trained_iter == std::vector<std::int64_t>{0, 1});
  CHECK_THROWS_AS(update_counters(state, scene, batch, 1), std::logic_error);
  CHECK_THROWS_AS(update_counters(state, scene, batch, 0), std::logic_error);
  CHECK(state.steps == std::vector<std::uint32_t>{0, 1});
  update_counters(state, scene, batch, 5);
  CHECK(state.steps == std::vector<std::uint32_t>{0, 2});
  CHECK(state.last_iteration == 5);
}

TEST_CASE("prioritization spreads training over rarely seen triangles") {
  const Fixture fx = make_mixed_fixture(3);
  const AreaSampler sampler(fx.scene);
  const TargetOracle oracle = [](const QueryPoint&, Pcg32&) { return Real(0); };
  auto run = [&](bool prioritize) {
    TriangleTrainState state(fx.scene.triangle_count());
    TrainerConfig cfg;
    cfg.batch_size = 256;
    cfg.prioritize = prioritize;
    std::size_t floor_samples = 0;
    for (int it = 1; it <= 40; ++it) {
      const auto batch = build_batch(state, fx.scene, sampler, oracle, cfg, 9, it);
      if (it == 40) {
        for (const auto& s : batch) floor_samples += s.query.point.mesh_id == 0;
      }
      update_counters(state, fx.scene, batch, it);
    }
    return std::make_pair(state.steps, floor_samples);
  };
  const auto [plain, plain_floor] = run(false);
  const auto [prio, prio_floor] = run(true);
  auto untouched = [](const std::vector<std::uint32_t>& s) { return std::count(s.begin(), s.end(), 0u); };
  CHECK(untouched(prio) < untouched(plain));
  // The two floor triangles dominate area-uniform sampling.
  CHECK(prio_floor * 2 < plain_floor);
}

TEST_CASE("train_iteration") {
  const Fixture fx = make_quad_fixture(8);
  const AreaSampler sampler(fx.scene);
  TrainerConfig cfg;
  cfg.batch_size = 512;

  SUBCASE("zero loss leaves every parameter unchanged") {
    for (EncoderConfig enc : {small_gate(2), EncoderConfig::hashgrid_default()}) {
      if (enc.kind == EncoderKind::HashGrid) enc.hash.table_size = 1u << 12;
      Model model(fx.scene, enc, 4);
      TriangleTrainState state(fx.scene.triangle_count());
      auto batch = build_batch(state, fx.scene, sampler, smooth_oracle(), cfg, 1, 1);
      std::vector<QueryPoint> queries;
      for (const auto& s : batch) queries.push_back(s.query);
      const auto pred = model.predict(queries);
      for (std::size_t i = 0; i < batch.size(); ++i) batch[i].target = pred[i];
      const Model before = model;
      const IterationResult r = train_iteration(model, state, fx.scene, batch, cfg, 1);
      CHECK(r.loss == 0);
      CHECK(std::equal(model.mlp.params().begin(), model.mlp.params().end(), before.mlp.params().begin()));
      CHECK(model.features.values == before.features.values);
      CHECK(model.grid.params == before.grid.params);
      CHECK(model.mlp_step == 1);
      CHECK(state.last_iteration == 1);
    }
  }

  SUBCASE("non-finite targets are reported") {
    Model model(fx.scene, small_gate(2), 4);
    TriangleTrainState state(fx.scene.triangle_count());
    const TargetOracle bad = [](const QueryPoint&, Pcg32&) { return std::numeric_limits<Real>::quiet_NaN(); };
    const auto batch = build_batch(state, fx.scene, sampler, bad, cfg, 1, 1);
    CHECK_THROWS_AS(train_iteration(model, state, fx.scene, batch, cfg, 1), std::runtime_error);
  }

  SUBCASE("sparse update touches only slots of batch triangles") {
    Model model(fx.scene, small_gate(2), 4);
    TriangleTrainState state(fx.scene.triangle_count());
    cfg.batch_size = 8;
    const auto batch = build_batch(state, fx.scene, sampler, smooth_oracle(), cfg, 1, 1);
    const Model before = model;
    const IterationResult r = train_iteration(model, state, fx.scene, batch, cfg, 1);
    CHECK(r.touched_slots > 0);
    std::size_t changed = 0;
    for (std::uint32_t s = 0; s < model.features.slot_count(); ++s) {
      changed += model.features.slot_step_count[s] != before.features.slot_step_count[s];
    }
    CHECK(changed == r.touched_slots);
    CHECK(changed < model.features.slot_count() / 4);
  }
}

TEST_CASE("training loop") {
  const Fixture fx = make_quad_fixture(8);

  SUBCASE("loss drops tenfold over 200 iterations") {
    for (EncoderConfig enc : {small_gate(4), EncoderConfig::hashgrid_default()}) {
      if (enc.kind == EncoderKind::HashGrid) enc.hash.table_size = 1u << 14;
      Model model(fx.scene, enc, 2);
      TriangleTrainState state(fx.scene.triangle_count());
      TrainLoopOptions opt;
      opt.trainer.batch_size = 512;
      opt.trainer.iterations = 200;
      opt.seed = 3;
      const auto rows = train_loop(model, state, fx.scene, smooth_oracle(), opt);
      REQUIRE(rows.size() == 200);
      double tail = 0;
      for (std::size_t i = 190; i < 200; ++i) tail += rows[i].loss / 10;
      CHECK(tail < 0.1 * rows[0].loss);
    }
  }

  SUBCASE("zero iterations change nothing") {
    Model model(fx.scene, small_gate(2), 2);
    const Model before = model;
    TriangleTrainState state(fx.scene.triangle_count());
    TrainLoopOptions opt;
    opt.trainer.iterations = 0;
    CHECK(train_loop(model, state, fx.scene, smooth_oracle(), opt).empty());
    CHECK(model == before);
    CHECK(state.last_iteration == 0);
  }

  SUBCASE("row numbering and evaluation cadence") {
    Model model(fx.scene, small_gate(2), 2);
    TriangleTrainState state(fx.scene.triangle_count());
    TrainLoopOptions opt;
    opt.trainer.batch_size = 64;
    opt.trainer.iterations = 7;
    opt.eval_every = 3;
    std::vector<std::int64_t> evaluated;
    opt.evaluator = [&](std::int64_t iter, const Model&) {
      evaluated.push_back(iter);
      return Evaluation{0.25, 6.0, 0};
    };
    int seen = 0;
    opt.on_row = [&](const MetricsRow&) { ++seen; };
    auto rows = train_loop(model, state, fx.scene, smooth_oracle(), opt);
    CHECK(rows.size() == 7);
    CHECK(seen == 7);
    CHECK(rows.front().iter == 1);
    CHECK(rows.back().iter == 7);
    CHECK(evaluated == std::vector<std::int64_t>{3, 6, 7});
    CHECK(rows[2].mse == 0.25);
    CHECK(!rows[0].mse);
    // Continuing resumes the numbering.
    opt.trainer.iterations = 2;
    rows = train_loop(model, state, fx.scene, smooth_oracle(), opt);
    CHECK(rows.front().iter == 8);
  }

  SUBCASE("identical results for any thread count") {
    auto run = [&](unsigned threads) {
      const unsigned saved = thread_count();
      set_thread_count(threads);
      Model model(fx.scene, small_gate(2), 2);
      TriangleTrainState state(fx.scene.triangle_count());
      TrainLoopOptions opt;
      opt.trainer.batch_size = 1024;
      opt.trainer.iterations = 4;
      train_loop(model, state, fx.scene, smooth_oracle(), opt);
      set_thread_count(saved);
      return std::make_pair(model, state);
    };
    const auto a = run(1);
    const auto b = run(4);
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
  }
}
