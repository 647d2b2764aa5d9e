#include "gate/mesh_colors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

GATE_NAMESPACE_BEGIN

void ResolutionConfig::validate() const {
  if (levels.empty() || levels.size() > kMaxLevels) {
    throw std::invalid_argument("resolution config needs 1 to 4 levels");
  }
  if (features_per_level < 1 || features_per_level > kMaxFeatures) {
    throw std::invalid_argument("features per level must be in [1, 8]");
  }
  for (const ResolutionLevel& level : levels) {
    if (level.kind == ResolutionLevel::Kind::Fixed &&
        (level.fixed_r < 1 || level.fixed_r > kMaxResolution)) {
      throw std::invalid_argument("fixed resolution must be in [1, 32]");
    }
    if (level.kind == ResolutionLevel::Kind::Adaptive && !(level.r_scale > 0)) {
      throw std::invalid_argument("R_scale must be positive");
    }
  }
}

std::string to_string(StorageMode mode) { return mode == StorageMode::Shared ? "shared" : "flat"; }

StorageMode storage_mode_from_string(const std::string& name) {
  if (name == "shared") return StorageMode::Shared;
  if (name == "flat") return StorageMode::Flat;
  throw std::invalid_argument("unknown storage mode '" + name + "' (expected shared|flat)");
}

int feature_count_per_triangle(int r) {
  if (r < 1) throw std::invalid_argument("mesh colors resolution must be >= 1");
  return (r + 1) * (r + 2) / 2;
}

int interior_count(int r) { return r < 3 ? 0 : (r - 1) * (r - 2) / 2; }

int adaptive_resolution(Real normalized_area, Real r_scale) {
  const double raw = 32.0 * double(normalized_area) * double(normalized_area) * double(r_scale);
  return static_cast<int>(std::lround(std::clamp(raw, 1.0, double(kMaxResolution))));
}

std::vector<Real> mesh_mean_normalized_areas(const Scene& scene) {
  std::vector<double> means;
  for (const Mesh& mesh : scene.meshes()) {
    means.push_back(double(mesh_surface_area(mesh)) / double(mesh.triangle_count()));
  }
  const double largest = means.empty() ? 0.0 : *std::max_element(means.begin(), means.end());
  if (!(largest > 0)) throw GeometryError("scene has only degenerate triangles");
  std::vector<Real> out;
  for (double m : means) out.push_back(static_cast<Real>(m / largest));
  return out;
}

LatticeClass classify(const LatticePoint& p, int r) {
  const int k = r - p.i - p.j;
  LatticeClass c;
  if (p.i == 0 && p.j == 0) {
    c.kind = LatticeClass::Kind::Vertex;
    c.corner = 0;
  } else if (p.j == 0 && k == 0) {
    c.kind = LatticeClass::Kind::Vertex;
    c.corner = 1;
  } else if (p.i == 0 && k == 0) {
    c.kind = LatticeClass::Kind::Vertex;
    c.corner = 2;
  } else if (p.j == 0) {
    c.kind = LatticeClass::Kind::Edge;
    c.local_edge = 0;
    c.step = p.i;
  } else if (k == 0) {
    c.kind = LatticeClass::Kind::Edge;
    c.local_edge = 1;
    c.step = p.j;
  } else if (p.i == 0) {
    c.kind = LatticeClass::Kind::Edge;
    c.local_edge = 2;
    c.step = p.j;
  } else {
    c.kind = LatticeClass::Kind::Interior;
    c.ordinal = (p.j - 1) * (r - 1) - (p.j - 1) * p.j / 2 + (p.i - 1);
  }
  return c;
}

Barycentric lattice_barycentric(const LatticePoint& p, int r) {
  const Real inv = Real(1) / Real(r);
  return {Real(r - p.i - p.j) * inv, Real(p.i) * inv, Real(p.j) * inv};
}

int local_lattice_ordinal(const LatticePoint& p, int r) {
  return p.j * (r + 1) - p.j * (p.j - 1) / 2 + p.i;
}

LatticeLocation locate(const Barycentric& bary, int r) {
  const Real rr = Real(r);
  const Real u = std::clamp(bary[1] * rr, Real(0), rr);
  const Real v = std::clamp(bary[2] * rr, Real(0), rr);
  int iu = static_cast<int>(std::floor(u));
  int iv = static_cast<int>(std::floor(v));
  Real fu = u - Real(iu);
  Real fv = v - Real(iv);
  // On the far boundary (u + v = R with integral parts summing to R) step
  // back into the last micro-triangle with a fractional part of 1.
  if (iu + iv >= r) {
    if (iu > 0) {
      --iu;
      fu += 1;
    } else {
      --iv;
      fv += 1;
    }
  }
  LatticeLocation loc;
  if (fu + fv <= 1 || iu + iv + 2 > r) {
    Real w0 = 1 - fu - fv;
    if (w0 < 0) {
      // Only reachable through rounding on the boundary.
      const Real s = fu + fv;
      fu /= s;
      fv /= s;
      w0 = 0;
    }
    loc.points = {LatticePoint{iu, iv}, LatticePoint{iu + 1, iv}, LatticePoint{iu, iv + 1}};
    loc.weights = {w0, fu, fv};
  } else {
    loc.points = {LatticePoint{iu + 1, iv + 1}, LatticePoint{iu, iv + 1}, LatticePoint{iu + 1, iv}};
    loc.weights = {fu + fv - 1, 1 - fu, 1 - fv};
  }
  return loc;
}

int LevelLayout::max_resolution() const {
  int r = 0;
  for (const auto& m : meshes) r = std::max(r, m.resolution);
  return r;
}

std::size_t FeatureLayout::finest_level() const {
  std::size_t best = 0;
  for (std::size_t l = 1; l < levels_.size(); ++l) {
    if (levels_[l].max_resolution() > levels_[best].max_resolution()) best = l;
  }
  return best;
}

std::uint32_t FeatureLayout::slot_of(std::size_t level, std::uint32_t mesh_id, std::uint32_t tri,
                                     const LatticePoint& p) const {
  const MeshLevelLayout& m = levels_[level].meshes[mesh_id];
  const int r = m.resolution;
  if (mode_ == StorageMode::Flat) {
    return m.base + tri * static_cast<std::uint32_t>(feature_count_per_triangle(r)) +
           static_cast<std::uint32_t>(local_lattice_ordinal(p, r));
  }
  const LatticeClass c = classify(p, r);
  switch (c.kind) {
    case LatticeClass::Kind::Vertex:
      return m.vertex_slots[tri][c.corner];
    case LatticeClass::Kind::Edge: {
      const bool reversed = (m.edge_reversed[tri] >> c.local_edge) & 1u;
      const int canonical = reversed ? r - c.step : c.step;
      return m.edge_bases[tri][c.local_edge] + static_cast<std::uint32_t>(canonical - 1);
    }
    case LatticeClass::Kind::Interior:
      return m.interior_base + tri * static_cast<std::uint32_t>(interior_count(r)) +
             static_cast<std::uint32_t>(c.ordinal);
  }
  return 0;
}

LookupResult FeatureLayout::resolve(std::size_t level, const SurfacePoint& point) const {
  const int r = levels_[level].meshes[point.mesh_id].resolution;
  const LatticeLocation loc = locate(point.bary, r);
  LookupResult out;
  for (int t = 0; t < 3; ++t) {
    out.slots[t] = slot_of(level, point.mesh_id, point.tri_id, loc.points[t]);
    out.weights[t] = loc.weights[t];
  }
  return out;
}

nlohmann::json FeatureLayout::stats_json() const {
  const std::uint64_t bytes_per_slot = 4ull * static_cast<std::uint64_t>(features_);
  nlohmann::json levels = nlohmann::json::array();
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    nlohmann::json meshes = nlohmann::json::array();
    for (std::size_t m = 0; m < levels_[l].meshes.size(); ++m) {
      const auto& ml = levels_[l].meshes[m];
      meshes.push_back({{"mesh", m},
                        {"R", ml.resolution},
                        {"slots", ml.slot_count},
                        {"bytes", ml.slot_count * bytes_per_slot}});
    }
    levels.push_back({{"level", l},
                      {"mode", to_string(mode_)},
                      {"slots", levels_[l].slot_count},
                      {"bytes", levels_[l].slot_count * bytes_per_slot},
                      {"meshes", std::move(meshes)}});
  }
  const std::uint64_t total_bytes = total_slots_ * bytes_per_slot;
  return {{"mode", to_string(mode_)},
          {"features_per_level", features_},
          {"total_slots", total_slots_},
          {"bytes", total_bytes},
          {"megabytes", double(total_bytes) / (1024.0 * 1024.0)},
          {"levels", std::move(levels)}};
}

std::vector<int> level_resolutions(const Scene& scene, const ResolutionLevel& level) {
  std::vector<int> out(scene.mesh_count(), level.fixed_r);
  if (level.kind == ResolutionLevel::Kind::Adaptive) {
    const std::vector<Real> areas = mesh_mean_normalized_areas(scene);
    for (std::size_t m = 0; m < areas.size(); ++m) out[m] = adaptive_resolution(areas[m], level.r_scale);
  }
  return out;
}

namespace {

std::uint32_t checked_add(std::uint64_t a, std::uint64_t b) {
  const std::uint64_t sum = a + b;
  if (sum >= std::numeric_limits<std::uint32_t>::max()) {
    throw std::length_error("feature layout exceeds 2^32 slots");
  }
  return static_cast<std::uint32_t>(sum);
}

MeshLevelLayout shared_mesh_layout(const Mesh& mesh, int r, std::uint32_t base) {
  MeshLevelLayout out;
  out.resolution = r;
  out.base = base;
  const auto tris = static_cast<std::uint32_t>(mesh.triangle_count());
  std::uint64_t next = base;

  std::vector<std::uint32_t> vertex_slot(mesh.vertices.size(), std::numeric_limits<std::uint32_t>::max());
  std::vector<bool> used(mesh.vertices.size(), false);
  for (const Triangle& t : mesh.indices) {
    for (std::uint32_t v : t) used[v] = true;
  }
  for (std::size_t v = 0; v < used.size(); ++v) {
    if (used[v]) vertex_slot[v] = checked_add(next++, 0);
  }

  out.vertex_slots.resize(tris);
  out.edge_bases.assign(tris, {0, 0, 0});
  out.edge_reversed.assign(tris, 0);
  for (std::uint32_t t = 0; t < tris; ++t) {
    for (int c = 0; c < 3; ++c) out.vertex_slots[t][c] = vertex_slot[mesh.indices[t][c]];
  }

  const auto edge_len = static_cast<std::uint64_t>(r - 1);
  if (edge_len > 0) {
    const Adjacency adj = build_adjacency(mesh);
    for (const auto& [key, uses] : adj.edges) {
      for (std::size_t u = 0; u < uses.size(); ++u) {
        // The first two incident triangles share one block; any further
        // (non-manifold) incidence gets a private block.
        if (u < 2 && u > 0) {
          out.edge_bases[uses[u].tri][uses[u].local_edge] = out.edge_bases[uses[0].tri][uses[0].local_edge];
        } else {
          out.edge_bases[uses[u].tri][uses[u].local_edge] = checked_add(next, 0);
          next += edge_len;
          if (u >= 2) ++out.non_manifold_extra_edges;
        }
        const int e = uses[u].local_edge;
        const int lower_corner = e == 2 ? 0 : e;
        if (mesh.indices[uses[u].tri][lower_corner] != key.lo) {
          out.edge_reversed[uses[u].tri] |= static_cast<std::uint8_t>(1u << e);
        }
      }
    }
  }

  out.interior_base = checked_add(next, 0);
  next += std::uint64_t(tris) * static_cast<std::uint64_t>(interior_count(r));
  out.slot_count = checked_add(next - base, 0);
  return out;
}

}  // namespace

FeatureLayout build_layout(const Scene& scene, const ResolutionConfig& config, StorageMode mode) {
  config.validate();
  FeatureLayout layout;
  layout.mode_ = mode;
  layout.features_ = config.features_per_level;
  std::uint64_t next = 0;
  for (const ResolutionLevel& level : config.levels) {
    const std::vector<int> rs = level_resolutions(scene, level);
    LevelLayout ll;
    ll.base = checked_add(next, 0);
    for (std::uint32_t m = 0; m < scene.mesh_count(); ++m) {
      const Mesh& mesh = scene.mesh(m);
      MeshLevelLayout ml;
      if (mode == StorageMode::Flat) {
        ml.resolution = rs[m];
        ml.base = checked_add(next, 0);
        ml.slot_count = checked_add(
            std::uint64_t(mesh.triangle_count()) * std::uint64_t(feature_count_per_triangle(rs[m])), 0);
      } else {
        ml = shared_mesh_layout(mesh, rs[m], checked_add(next, 0));
      }
      next += ml.slot_count;
      ll.meshes.push_back(std::move(ml));
    }
    ll.slot_count = checked_add(next - ll.base, 0);
    layout.levels_.push_back(std::move(ll));
  }
  layout.total_slots_ = checked_add(next, 0);
  return layout;
}

GATE_NAMESPACE_END
