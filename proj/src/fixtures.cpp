#include "gate/fixtures.hpp"

#include <map>

GATE_NAMESPACE_BEGIN

namespace {

template <typename Map>
Mesh grid_mesh(int n, const std::string& name, Map&& map) {
  if (n < 1) throw GeometryError("grid subdivision must be at least 1");
  Mesh mesh;
  mesh.name = name;
  const auto stride = static_cast<std::uint32_t>(n + 1);
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) mesh.vertices.push_back(map(Real(i) / Real(n), Real(j) / Real(n)));
  }
  for (std::uint32_t j = 0; j < static_cast<std::uint32_t>(n); ++j) {
    for (std::uint32_t i = 0; i < static_cast<std::uint32_t>(n); ++i) {
      const std::uint32_t v00 = j * stride + i, v10 = v00 + 1, v01 = v00 + stride, v11 = v01 + 1;
      mesh.indices.push_back({v00, v10, v11});
      mesh.indices.push_back({v00, v11, v01});
    }
  }
  return mesh;
}

}  // namespace

Mesh make_grid_quad(int n, Real size, const std::string& name) {
  return grid_mesh(n, name, [size](Real u, Real v) { return Vec3{u * size, v * size, 0}; });
}

Mesh make_icosphere(int levels, Real radius, const Vec3& center, const std::string& name) {
  const Real t = (1 + std::sqrt(Real(5))) / 2;
  std::vector<Vec3> unit = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                            {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                            {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (Vec3& v : unit) v = normalize(v);
  std::vector<Triangle> tris = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int l = 0; l < levels; ++l) {
    std::map<EdgeKey, std::uint32_t> midpoints;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto [it, inserted] =
          midpoints.try_emplace(EdgeKey::make(a, b), static_cast<std::uint32_t>(unit.size()));
      if (inserted) unit.push_back(normalize(unit[a] + unit[b]));
      return it->second;
    };
    std::vector<Triangle> next;
    next.reserve(tris.size() * 4);
    for (const Triangle& tri : tris) {
      const std::uint32_t ab = midpoint(tri[0], tri[1]);
      const std::uint32_t bc = midpoint(tri[1], tri[2]);
      const std::uint32_t ca = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], ab, ca});
      next.push_back({tri[1], bc, ab});
      next.push_back({tri[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    tris = std::move(next);
  }
  Mesh mesh;
  mesh.name = name;
  for (const Vec3& v : unit) mesh.vertices.push_back(center + v * radius);
  mesh.indices = std::move(tris);
  return mesh;
}

Mesh make_room(const Vec3& lo, const Vec3& hi, const std::string& name) {
  Mesh mesh;
  mesh.name = name;
  for (int k = 0; k < 8; ++k) {
    mesh.vertices.push_back({(k & 1) ? hi.x : lo.x, (k & 2) ? hi.y : lo.y, (k & 4) ? hi.z : lo.z});
  }
  // Each face lists its corners counter-clockwise as seen from inside.
  const std::uint32_t faces[6][4] = {
      {0, 4, 5, 1},  // floor y = lo, normal +y
      {2, 3, 7, 6},  // ceiling y = hi, normal -y
      {0, 1, 3, 2},  // z = lo, normal +z
      {4, 6, 7, 5},  // z = hi, normal -z
      {0, 2, 6, 4},  // x = lo, normal +x
      {1, 5, 7, 3},  // x = hi, normal -x
  };
  for (const auto& f : faces) {
    mesh.indices.push_back({f[0], f[1], f[2]});
    mesh.indices.push_back({f[0], f[2], f[3]});
  }
  return mesh;
}

Fixture make_quad_fixture(int n) {
  Fixture f;
  f.scene.add_mesh(make_grid_quad(n));
  f.camera.position = {0.5, 0.5, 1.5};
  f.camera.look_at = {0.5, 0.5, 0};
  f.camera.up = {0, 1, 0};
  f.camera.vfov_degrees = 40;
  return f;
}

Fixture make_corner_fixture(int n) {
  Fixture f;
  f.scene.add_mesh(grid_mesh(n, "floor", [](Real u, Real v) { return Vec3{2 * u - 1, 0, 2 - 2 * v}; }));
  f.scene.add_mesh(grid_mesh(n, "wall", [](Real u, Real v) { return Vec3{2 * u - 1, 2 * v, 0}; }));
  f.camera.position = {0, 1.4, 2.6};
  f.camera.look_at = {0, 0.35, 0.35};
  f.camera.up = {0, 1, 0};
  f.camera.vfov_degrees = 50;
  return f;
}

Fixture make_stadium_fixture(int sphere_levels) {
  Fixture f;
  f.scene.add_mesh(make_room({-50, 0, -50}, {50, 100, 50}, "stadium"));
  f.scene.add_mesh(make_icosphere(sphere_levels, Real(0.5), {0, Real(0.5), 0}, "teapot"));
  f.camera.position = {0, 1.1, 2.2};
  f.camera.look_at = {0, 0.35, 0};
  f.camera.up = {0, 1, 0};
  f.camera.vfov_degrees = 40;
  return f;
}

Fixture make_mixed_fixture(int sphere_levels) {
  Fixture f;
  f.scene.add_mesh(
      grid_mesh(1, "ground", [](Real u, Real v) { return Vec3{10 * u - 5, 0, 5 - 10 * v}; }));
  f.scene.add_mesh(make_icosphere(sphere_levels, 1, {0, 1, 0}, "ball"));
  f.camera.position = {0, 2.4, 4.4};
  f.camera.look_at = {0, 0.7, 0};
  f.camera.up = {0, 1, 0};
  f.camera.vfov_degrees = 45;
  return f;
}

Fixture make_fixture(const std::string& name) {
  if (name == "corner") return make_corner_fixture();
  if (name == "quad") return make_quad_fixture();
  if (name == "stadium") return make_stadium_fixture();
  if (name == "mixed") return make_mixed_fixture();
  throw GeometryError("unknown fixture '" + name + "' (expected corner|quad|stadium|mixed)");
}

GATE_NAMESPACE_END
