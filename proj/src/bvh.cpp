#include "gate/bvh.hpp"

#include <algorithm>
#include <array>

GATE_NAMESPACE_BEGIN

namespace {
constexpr int kBins = 16;
constexpr std::uint32_t kMaxLeafSize = 4;
constexpr Real kTraversalCost = 1;
constexpr Real kIntersectCost = 1;
constexpr int kMaxSahDepth = 48;

struct InvRay {
  Vec3 origin;
  Vec3 inv_dir;
};

inline bool slab_test(const Aabb& box, const InvRay& r, Real t_min, Real t_max, Real& t_enter) {
  Real t0 = t_min;
  Real t1 = t_max;
  for (int a = 0; a < 3; ++a) {
    Real near = (box.lo[a] - r.origin[a]) * r.inv_dir[a];
    Real far = (box.hi[a] - r.origin[a]) * r.inv_dir[a];
    if (near > far) std::swap(near, far);
    // NaN from 0 * inf leaves the bounds untouched.
    t0 = near > t0 ? near : t0;
    t1 = far < t1 ? far : t1;
  }
  t_enter = t0;
  return t0 <= t1;
}
}  // namespace

bool intersect_triangle(const Ray& ray, const Vec3& v0, const Vec3& e1, const Vec3& e2, Real& t,
                        Real& u, Real& v) {
  const Vec3 p = cross(ray.dir, e2);
  const Real det = dot(e1, p);
  if (std::abs(det) < std::numeric_limits<Real>::min() * 16) return false;
  const Real inv_det = 1 / det;
  const Vec3 s = ray.origin - v0;
  u = dot(s, p) * inv_det;
  if (u < 0 || u > 1) return false;
  const Vec3 q = cross(s, e1);
  v = dot(ray.dir, q) * inv_det;
  if (v < 0 || u + v > 1) return false;
  t = dot(e2, q) * inv_det;
  return t > ray.t_min && t < ray.t_max;
}

Bvh::Bvh(const Scene& scene) : scene_(&scene) {
  const std::size_t n = scene.triangle_count();
  if (n == 0) throw GeometryError("cannot build a BVH over an empty scene");
  std::vector<std::uint32_t> order(n);
  std::vector<Aabb> boxes(n);
  std::vector<Vec3> centroids(n);
  std::vector<PackedTriangle> packed(n);
  std::size_t g = 0;
  for (std::uint32_t m = 0; m < scene.mesh_count(); ++m) {
    const Mesh& mesh = scene.mesh(m);
    for (std::uint32_t t = 0; t < mesh.triangle_count(); ++t, ++g) {
      const Vec3 a = mesh.corner(t, 0), b = mesh.corner(t, 1), c = mesh.corner(t, 2);
      boxes[g].extend(a);
      boxes[g].extend(b);
      boxes[g].extend(c);
      centroids[g] = (a + b + c) / Real(3);
      packed[g] = {a, b - a, c - a, m, t};
      order[g] = static_cast<std::uint32_t>(g);
    }
  }
  nodes_.reserve(2 * n);
  build(order, boxes, centroids, 0, static_cast<std::uint32_t>(n), 0);
  tris_.reserve(n);
  for (std::uint32_t i : order) tris_.push_back(packed[i]);
}

std::uint32_t Bvh::build(std::vector<std::uint32_t>& order, std::vector<Aabb>& boxes,
                         std::vector<Vec3>& centroids, std::uint32_t begin, std::uint32_t end,
                         int depth) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  Aabb box, centroid_box;
  for (std::uint32_t i = begin; i < end; ++i) {
    box.extend(boxes[order[i]]);
    centroid_box.extend(centroids[order[i]]);
  }
  nodes_[index].box = box;
  const std::uint32_t count = end - begin;

  auto make_leaf = [&] {
    nodes_[index].first = begin;
    nodes_[index].count = count;
    return index;
  };
  if (count <= kMaxLeafSize) return make_leaf();

  // Binned SAH over the axis-aligned centroid bounds.
  Real best_cost = std::numeric_limits<Real>::max();
  int best_axis = -1;
  int best_split = 0;
  const Vec3 extent = centroid_box.extent();
  for (int axis = 0; axis < 3; ++axis) {
    if (extent[axis] <= 0) continue;
    std::array<Aabb, kBins> bin_box{};
    std::array<std::uint32_t, kBins> bin_count{};
    const Real scale = kBins / extent[axis];
    for (std::uint32_t i = begin; i < end; ++i) {
      const auto p = order[i];
      int b = static_cast<int>((centroids[p][axis] - centroid_box.lo[axis]) * scale);
      b = std::clamp(b, 0, kBins - 1);
      bin_box[b].extend(boxes[p]);
      ++bin_count[b];
    }
    std::array<Real, kBins - 1> right_area{};
    std::array<std::uint32_t, kBins - 1> right_count{};
    Aabb acc;
    std::uint32_t acc_count = 0;
    for (int b = kBins - 1; b > 0; --b) {
      acc.extend(bin_box[b]);
      acc_count += bin_count[b];
      right_area[b - 1] = acc.empty() ? 0 : acc.surface_area();
      right_count[b - 1] = acc_count;
    }
    acc = Aabb{};
    acc_count = 0;
    for (int b = 0; b < kBins - 1; ++b) {
      acc.extend(bin_box[b]);
      acc_count += bin_count[b];
      if (acc_count == 0 || right_count[b] == 0) continue;
      const Real cost = acc.surface_area() * acc_count + right_area[b] * right_count[b];
      if (cost < best_cost) {
        best_cost = cost;
        best_axis = axis;
        best_split = b;
      }
    }
  }

  std::uint32_t mid = begin;
  if (depth >= kMaxSahDepth) {
    // Keeps the traversal stack bounded on adversarial inputs.
    int axis = 0;
    if (extent.y > extent[axis]) axis = 1;
    if (extent.z > extent[axis]) axis = 2;
    mid = begin + count / 2;
    std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       return centroids[a][axis] < centroids[b][axis];
                     });
  } else if (best_axis >= 0) {
    const Real leaf_cost = kIntersectCost * count;
    const Real split_cost =
        kTraversalCost + kIntersectCost * best_cost / std::max(box.surface_area(), Real(1e-30));
    if (split_cost >= leaf_cost && count <= 2 * kMaxLeafSize) return make_leaf();
    const Real scale = kBins / extent[best_axis];
    const auto it = std::partition(order.begin() + begin, order.begin() + end, [&](std::uint32_t p) {
      int b = static_cast<int>((centroids[p][best_axis] - centroid_box.lo[best_axis]) * scale);
      return std::clamp(b, 0, kBins - 1) <= best_split;
    });
    mid = static_cast<std::uint32_t>(it - order.begin());
  }
  if (mid == begin || mid == end) {
    // All centroids coincide: split by count.
    mid = begin + count / 2;
  }

  build(order, boxes, centroids, begin, mid, depth + 1);  // left child is index + 1
  const std::uint32_t right = build(order, boxes, centroids, mid, end, depth + 1);
  nodes_[index].first = right;
  nodes_[index].count = 0;
  return index;
}

template <bool AnyHit>
bool Bvh::traverse(const Ray& ray, Real& t_best, std::uint32_t& tri_best, Real& u_best,
                   Real& v_best) const {
  const InvRay inv{ray.origin, {1 / ray.dir.x, 1 / ray.dir.y, 1 / ray.dir.z}};
  Ray probe = ray;
  bool found = false;
  std::array<std::uint32_t, 128> stack{};
  int sp = 0;
  std::uint32_t node = 0;
  Real t_enter = 0;
  if (!slab_test(nodes_[0].box, inv, probe.t_min, probe.t_max, t_enter)) return false;
  for (;;) {
    const Node& n = nodes_[node];
    if (n.count > 0) {
      for (std::uint32_t i = n.first; i < n.first + n.count; ++i) {
        const PackedTriangle& tri = tris_[i];
        Real t, u, v;
        if (intersect_triangle(probe, tri.v0, tri.e1, tri.e2, t, u, v)) {
          found = true;
          if constexpr (AnyHit) return true;
          probe.t_max = t;
          tri_best = i;
          u_best = u;
          v_best = v;
        }
      }
    } else {
      const std::uint32_t left = node + 1;
      const std::uint32_t right = n.first;
      Real t_left = 0, t_right = 0;
      const bool hit_left = slab_test(nodes_[left].box, inv, probe.t_min, probe.t_max, t_left);
      const bool hit_right = slab_test(nodes_[right].box, inv, probe.t_min, probe.t_max, t_right);
      if (hit_left && hit_right) {
        const bool left_first = t_left <= t_right;
        stack[sp++] = left_first ? right : left;
        node = left_first ? left : right;
        continue;
      }
      if (hit_left) {
        node = left;
        continue;
      }
      if (hit_right) {
        node = right;
        continue;
      }
    }
    if (sp == 0) break;
    node = stack[--sp];
  }
  t_best = probe.t_max;
  return found;
}

std::optional<Hit> Bvh::intersect(const Ray& ray) const {
  Real t = 0, u = 0, v = 0;
  std::uint32_t tri = 0;
  if (!traverse<false>(ray, t, tri, u, v)) return std::nullopt;
  const PackedTriangle& p = tris_[tri];
  Hit hit;
  hit.t = t;
  hit.point = {p.mesh_id, p.tri_id, {1 - u - v, u, v}};
  hit.position = p.v0 + p.e1 * u + p.e2 * v;
  hit.geo_normal = normalize(cross(p.e1, p.e2));
  return hit;
}

bool Bvh::occluded(const Ray& ray) const {
  Real t = 0, u = 0, v = 0;
  std::uint32_t tri = 0;
  return traverse<true>(ray, t, tri, u, v);
}

GATE_NAMESPACE_END
