#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "gate/geometry.hpp"

GATE_NAMESPACE_BEGIN

// Mesh-colors feature distribution. A triangle at resolution R carries a
// lattice of (R+1)(R+2)/2 samples addressed by (i, j) with i + j <= R; i
// runs towards corner 1, j towards corner 2 and k = R - i - j towards corner 0.

inline constexpr int kMaxResolution = 32;
inline constexpr int kMaxLevels = 4;
inline constexpr int kMaxFeatures = 8;

struct LatticePoint {
  int i = 0;
  int j = 0;
  bool operator==(const LatticePoint&) const = default;
};

struct LatticeClass {
  enum class Kind : std::uint8_t { Vertex, Edge, Interior };
  Kind kind = Kind::Vertex;
  int corner = 0;      // Vertex
  int local_edge = 0;  // Edge: spans corners (e, (e+1) % 3)
  int step = 0;        // Edge: 1..R-1 measured from the edge's lower local corner
  int ordinal = 0;     // Interior: 0..(R-1)(R-2)/2 - 1

  bool operator==(const LatticeClass&) const = default;
};

/// One stacked resolution: either a fixed R or the area-adaptive rule.
struct ResolutionLevel {
  enum class Kind : std::uint8_t { Fixed, Adaptive };
  Kind kind = Kind::Fixed;
  int fixed_r = 1;
  Real r_scale = 1;

  static ResolutionLevel fixed(int r) { return {Kind::Fixed, r, 1}; }
  static ResolutionLevel adaptive(Real scale) { return {Kind::Adaptive, 1, scale}; }
  bool operator==(const ResolutionLevel&) const = default;
};

struct ResolutionConfig {
  std::vector<ResolutionLevel> levels{ResolutionLevel::adaptive(1), ResolutionLevel::fixed(1)};
  int features_per_level = 2;

  void validate() const;
  bool operator==(const ResolutionConfig&) const = default;
};

enum class StorageMode : std::uint8_t { Shared, Flat };

std::string to_string(StorageMode mode);
StorageMode storage_mode_from_string(const std::string& name);

int feature_count_per_triangle(int r);
/// Interior lattice samples of one triangle, (R-1)(R-2)/2.
int interior_count(int r);
/// Area-adaptive resolution, rounded and clamped to [1, 32].
int adaptive_resolution(Real normalized_area, Real r_scale);
/// Mean triangle area of each mesh divided by the largest such mean.
std::vector<Real> mesh_mean_normalized_areas(const Scene& scene);

LatticeClass classify(const LatticePoint& p, int r);
/// Position of a lattice point in barycentric coordinates of its triangle.
Barycentric lattice_barycentric(const LatticePoint& p, int r);
/// Row-major ordinal of (i, j) among all samples of a triangle (Flat storage).
int local_lattice_ordinal(const LatticePoint& p, int r);

struct LatticeLocation {
  std::array<LatticePoint, 3> points;
  std::array<Real, 3> weights;
};
/// Micro-triangle containing `bary` and the interpolation weights inside it.
LatticeLocation locate(const Barycentric& bary, int r);

struct LookupResult {
  std::array<std::uint32_t, 3> slots{};
  std::array<Real, 3> weights{};
};

/// Feature slot assignment for one mesh at one level.
struct MeshLevelLayout {
  int resolution = 1;
  std::uint32_t base = 0;        // first slot (global numbering)
  std::uint32_t slot_count = 0;  // slots owned by this mesh
  // Shared mode only, per triangle: vertex slots by corner, first slot of the
  // R-1 edge samples per local edge, and a bit per edge that is set when the
  // local step direction runs against the canonical lo->hi vertex order.
  std::vector<std::array<std::uint32_t, 3>> vertex_slots;
  std::vector<std::array<std::uint32_t, 3>> edge_bases;
  std::vector<std::uint8_t> edge_reversed;
  std::uint32_t interior_base = 0;
  std::uint32_t non_manifold_extra_edges = 0;
};

struct LevelLayout {
  std::uint32_t base = 0;
  std::uint32_t slot_count = 0;
  std::vector<MeshLevelLayout> meshes;

  int max_resolution() const;
};

class FeatureLayout {
 public:
  FeatureLayout() = default;

  StorageMode mode() const { return mode_; }
  int features_per_level() const { return features_; }
  std::uint32_t total_slots() const { return total_slots_; }
  std::size_t level_count() const { return levels_.size(); }
  const LevelLayout& level(std::size_t l) const { return levels_.at(l); }
  int resolution(std::size_t level, std::uint32_t mesh_id) const {
    return levels_[level].meshes[mesh_id].resolution;
  }
  /// Index of the level with the highest maximum resolution (ties: first).
  std::size_t finest_level() const;

  /// Slot of lattice point p on triangle tri of mesh_id at `level`.
  std::uint32_t slot_of(std::size_t level, std::uint32_t mesh_id, std::uint32_t tri,
                        const LatticePoint& p) const;
  LookupResult resolve(std::size_t level, const SurfacePoint& point) const;

  /// Per-level statistics: mode, per-mesh R, slot counts and bytes.
  nlohmann::json stats_json() const;

 private:
  friend FeatureLayout build_layout(const Scene&, const ResolutionConfig&, StorageMode);

  StorageMode mode_ = StorageMode::Shared;
  int features_ = 2;
  std::uint32_t total_slots_ = 0;
  std::vector<LevelLayout> levels_;
};

/// Per-mesh resolution for one level of `config`.
std::vector<int> level_resolutions(const Scene& scene, const ResolutionLevel& level);

FeatureLayout build_layout(const Scene& scene, const ResolutionConfig& config, StorageMode mode);

GATE_NAMESPACE_END
