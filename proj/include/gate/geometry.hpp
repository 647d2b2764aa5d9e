#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gate/math.hpp"

GATE_NAMESPACE_BEGIN

using Triangle = std::array<std::uint32_t, 3>;
using Barycentric = std::array<Real, 3>;
using Rgb = std::array<Real, 3>;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// OBJ syntax or content error; `line()` is 1-based (0 when not tied to a line).
class ObjParseError : public GeometryError {
 public:
  ObjParseError(std::size_t line, const std::string& what)
      : GeometryError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// A triangle mesh. Counter-clockwise winding defines the geometric normal,
/// and the feature storage is single sided.
struct Mesh {
  std::string name;
  std::vector<Vec3> vertices;
  std::vector<Triangle> indices;
  std::optional<Rgb> albedo;

  std::size_t triangle_count() const { return indices.size(); }
  Vec3 corner(std::uint32_t tri, int c) const { return vertices[indices[tri][c]]; }
  Vec3 interpolate(std::uint32_t tri, const Barycentric& b) const {
    return corner(tri, 0) * b[0] + corner(tri, 1) * b[1] + corner(tri, 2) * b[2];
  }
  /// Unit normal from winding; zero for degenerate triangles.
  Vec3 geometric_normal(std::uint32_t tri) const;

  /// Throws GeometryError when an invariant is violated.
  void validate() const;
};

struct Aabb {
  Vec3 lo{std::numeric_limits<Real>::max(), std::numeric_limits<Real>::max(),
          std::numeric_limits<Real>::max()};
  Vec3 hi{-std::numeric_limits<Real>::max(), -std::numeric_limits<Real>::max(),
          -std::numeric_limits<Real>::max()};

  void extend(const Vec3& p) {
    lo = min(lo, p);
    hi = max(hi, p);
  }
  void extend(const Aabb& b) {
    lo = min(lo, b.lo);
    hi = max(hi, b.hi);
  }
  bool empty() const { return lo.x > hi.x; }
  Vec3 extent() const { return hi - lo; }
  Vec3 center() const { return (lo + hi) * Real(0.5); }
  Real diagonal() const { return empty() ? Real(0) : length(extent()); }
  Real surface_area() const {
    const Vec3 e = extent();
    return 2 * (e.x * e.y + e.y * e.z + e.z * e.x);
  }
  bool contains(const Vec3& p) const {
    return p.x >= lo.x && p.y >= lo.y && p.z >= lo.z && p.x <= hi.x && p.y <= hi.y &&
           p.z <= hi.z;
  }
};

/// Ordered meshes; the position in `meshes()` is the mesh id.
class Scene {
 public:
  Scene() = default;
  explicit Scene(std::vector<Mesh> meshes);

  void add_mesh(Mesh mesh);

  const std::vector<Mesh>& meshes() const { return meshes_; }
  const Mesh& mesh(std::uint32_t id) const { return meshes_.at(id); }
  std::size_t mesh_count() const { return meshes_.size(); }
  const Aabb& aabb() const { return aabb_; }

  std::size_t triangle_count() const { return triangle_offsets_.back(); }
  /// Global index of (mesh, tri) in a scene-wide triangle numbering.
  std::size_t global_triangle(std::uint32_t mesh_id, std::uint32_t tri_id) const {
    return triangle_offsets_[mesh_id] + tri_id;
  }
  std::size_t triangle_offset(std::uint32_t mesh_id) const { return triangle_offsets_[mesh_id]; }
  /// Inverse of global_triangle.
  std::pair<std::uint32_t, std::uint32_t> split_global(std::size_t global) const;

 private:
  std::vector<Mesh> meshes_;
  Aabb aabb_;
  std::vector<std::size_t> triangle_offsets_{0};
};

struct SurfacePoint {
  std::uint32_t mesh_id = 0;
  std::uint32_t tri_id = 0;
  Barycentric bary{1, 0, 0};

  bool operator==(const SurfacePoint&) const = default;
};

struct Ray {
  Vec3 origin;
  Vec3 dir;
  Real t_min = 0;
  Real t_max = std::numeric_limits<Real>::infinity();
};

struct Hit {
  SurfacePoint point;
  Real t = 0;
  Vec3 geo_normal;
  Vec3 position;
};

/// Undirected edge keyed by its global vertex indices, lo < hi.
struct EdgeKey {
  std::uint32_t lo = 0;
  std::uint32_t hi = 0;

  static EdgeKey make(std::uint32_t a, std::uint32_t b) {
    return a < b ? EdgeKey{a, b} : EdgeKey{b, a};
  }
  auto operator<=>(const EdgeKey&) const = default;
};

struct EdgeUse {
  std::uint32_t tri = 0;
  std::uint8_t local_edge = 0;  // spans local vertices (e, (e+1) % 3)
  auto operator<=>(const EdgeUse&) const = default;
};

struct Adjacency {
  std::map<EdgeKey, std::vector<EdgeUse>> edges;
  /// Edges with more than two incident triangles.
  std::vector<EdgeKey> non_manifold;

  bool is_non_manifold(const EdgeKey& key) const;
};

Scene load_obj(const std::filesystem::path& path);
/// Parses OBJ text; `o`/`g` records start new meshes, polygons are fan triangulated.
Scene parse_obj(std::istream& in, const std::string& default_name = "mesh");

Real triangle_area(const Mesh& mesh, std::uint32_t tri_id);
Real mesh_surface_area(const Mesh& mesh);

Adjacency build_adjacency(const Mesh& mesh);

/// Area-uniform warp of (u1, u2) in [0,1)^2 onto the triangle.
SurfacePoint sample_surface_point(std::uint32_t mesh_id, std::uint32_t tri_id, Real u1, Real u2);

/// Position and unit geometric normal of a surface point.
Vec3 surface_position(const Scene& scene, const SurfacePoint& p);
Vec3 surface_normal(const Scene& scene, const SurfacePoint& p);

GATE_NAMESPACE_END
