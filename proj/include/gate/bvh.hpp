#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gate/geometry.hpp"

GATE_NAMESPACE_BEGIN

/// Binned-SAH bounding volume hierarchy over every triangle of a scene.
/// Immutable after construction; queries are re-entrant.
class Bvh {
 public:
  explicit Bvh(const Scene& scene);

  /// Nearest hit with t in (ray.t_min, ray.t_max).
  std::optional<Hit> intersect(const Ray& ray) const;
  /// True iff any hit exists in (ray.t_min, ray.t_max).
  bool occluded(const Ray& ray) const;

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t triangle_count() const { return tris_.size(); }
  bool root_is_leaf() const { return nodes_.front().count > 0; }
  const Scene& scene() const { return *scene_; }

 private:
  struct Node {
    Aabb box;
    std::uint32_t first = 0;  // leaf: first triangle; interior: right child
    std::uint32_t count = 0;  // 0 for interior nodes
  };
  struct PackedTriangle {
    Vec3 v0, e1, e2;
    std::uint32_t mesh_id, tri_id;
  };

  std::uint32_t build(std::vector<std::uint32_t>& order, std::vector<Aabb>& boxes,
                      std::vector<Vec3>& centroids, std::uint32_t begin, std::uint32_t end,
                      int depth);
  template <bool AnyHit>
  bool traverse(const Ray& ray, Real& t_best, std::uint32_t& tri_best, Real& u_best,
                Real& v_best) const;

  const Scene* scene_;
  std::vector<Node> nodes_;
  std::vector<PackedTriangle> tris_;
};

/// Möller–Trumbore test; returns t and the (u, v) weights of corners 1 and 2.
bool intersect_triangle(const Ray& ray, const Vec3& v0, const Vec3& e1, const Vec3& e2, Real& t,
                        Real& u, Real& v);

GATE_NAMESPACE_END
