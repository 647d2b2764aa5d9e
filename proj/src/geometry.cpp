#include "gate/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

GATE_NAMESPACE_BEGIN

Vec3 Mesh::geometric_normal(std::uint32_t tri) const {
  const Vec3 n = cross(corner(tri, 1) - corner(tri, 0), corner(tri, 2) - corner(tri, 0));
  const Real len = length(n);
  return len > 0 ? n / len : Vec3{};
}

void Mesh::validate() const {
  if (indices.empty()) throw GeometryError("mesh '" + name + "' has no triangles");
  for (const Vec3& v : vertices) {
    if (!is_finite(v)) throw GeometryError("mesh '" + name + "' has a non-finite vertex");
  }
  for (const Triangle& t : indices) {
    for (std::uint32_t i : t) {
      if (i >= vertices.size()) {
        throw GeometryError("mesh '" + name + "' index " + std::to_string(i) + " out of range");
      }
    }
  }
  if (albedo) {
    for (Real c : *albedo) {
      if (!(c >= 0 && c <= 1)) throw GeometryError("mesh '" + name + "' albedo outside [0,1]");
    }
  }
}

Scene::Scene(std::vector<Mesh> meshes) {
  for (auto& m : meshes) add_mesh(std::move(m));
}

void Scene::add_mesh(Mesh mesh) {
  mesh.validate();
  for (const Vec3& v : mesh.vertices) aabb_.extend(v);
  triangle_offsets_.push_back(triangle_offsets_.back() + mesh.triangle_count());
  meshes_.push_back(std::move(mesh));
}

std::pair<std::uint32_t, std::uint32_t> Scene::split_global(std::size_t global) const {
  const auto it = std::upper_bound(triangle_offsets_.begin(), triangle_offsets_.end(), global);
  const auto mesh_id = static_cast<std::uint32_t>(it - triangle_offsets_.begin() - 1);
  return {mesh_id, static_cast<std::uint32_t>(global - triangle_offsets_[mesh_id])};
}

bool Adjacency::is_non_manifold(const EdgeKey& key) const {
  const auto it = edges.find(key);
  return it != edges.end() && it->second.size() > 2;
}

namespace {

bool parse_real(std::string_view token, Real& out) {
  // std::from_chars for floating point is available in libstdc++ 11.
  double value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) return false;
  out = static_cast<Real>(value);
  return true;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

// Builds one output mesh from global OBJ vertex indices, keeping only the
// vertices it references in first-use order.
struct MeshBuilder {
  std::string name;
  std::vector<Triangle> global_tris;

  Mesh finish(const std::vector<Vec3>& positions) const {
    Mesh mesh;
    mesh.name = name;
    std::unordered_map<std::uint32_t, std::uint32_t> remap;
    for (const Triangle& t : global_tris) {
      Triangle local{};
      for (int c = 0; c < 3; ++c) {
        auto [it, inserted] =
            remap.try_emplace(t[c], static_cast<std::uint32_t>(mesh.vertices.size()));
        if (inserted) mesh.vertices.push_back(positions[t[c]]);
        local[c] = it->second;
      }
      mesh.indices.push_back(local);
    }
    return mesh;
  }
};

}  // namespace

Scene parse_obj(std::istream& in, const std::string& default_name) {
  std::vector<Vec3> positions;
  std::vector<MeshBuilder> builders(1);
  builders.back().name = default_name;
  // Faces are resolved after reading so that forward references fail with
  // the face's line number.
  struct PendingFace {
    std::size_t line;
    std::size_t builder;
    std::vector<long> refs;
    std::size_t vertex_count_at_line;
  };
  std::vector<PendingFace> faces;

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string_view line = std::string_view(raw).substr(0, hash);
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    const std::string_view tag = tokens[0];
    if (tag == "v") {
      if (tokens.size() < 4) throw ObjParseError(line_no, "vertex needs 3 coordinates");
      Vec3 p;
      for (int a = 0; a < 3; ++a) {
        if (!parse_real(tokens[a + 1], p[a])) {
          throw ObjParseError(line_no, "bad coordinate '" + std::string(tokens[a + 1]) + "'");
        }
      }
      if (!is_finite(p)) throw ObjParseError(line_no, "non-finite coordinate");
      positions.push_back(p);
    } else if (tag == "f") {
      if (tokens.size() < 4) throw ObjParseError(line_no, "face needs at least 3 vertices");
      PendingFace face{line_no, builders.size() - 1, {}, positions.size()};
      for (std::size_t k = 1; k < tokens.size(); ++k) {
        const std::string_view ref = tokens[k].substr(0, tokens[k].find('/'));
        long idx = 0;
        const auto [ptr, ec] = std::from_chars(ref.data(), ref.data() + ref.size(), idx);
        if (ec != std::errc() || ptr != ref.data() + ref.size() || idx == 0) {
          throw ObjParseError(line_no, "bad face index '" + std::string(tokens[k]) + "'");
        }
        face.refs.push_back(idx);
      }
      faces.push_back(std::move(face));
    } else if (tag == "o" || tag == "g") {
      std::string name = tokens.size() > 1 ? std::string(tokens[1]) : default_name;
      if (faces.empty() || faces.back().builder != builders.size() - 1) {
        builders.back().name = std::move(name);
      } else {
        builders.push_back(MeshBuilder{std::move(name), {}});
      }
    }
    // vn, vt, s, usemtl, mtllib and others are ignored.
  }

  for (const PendingFace& face : faces) {
    std::vector<std::uint32_t> idx;
    for (long r : face.refs) {
      // Negative references are relative to the vertices read so far.
      const long resolved = r > 0 ? r - 1 : static_cast<long>(face.vertex_count_at_line) + r;
      if (resolved < 0 || static_cast<std::size_t>(resolved) >= positions.size()) {
        throw ObjParseError(face.line, "vertex index " + std::to_string(r) + " out of range");
      }
      idx.push_back(static_cast<std::uint32_t>(resolved));
    }
    for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
      builders[face.builder].global_tris.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }

  Scene scene;
  for (const MeshBuilder& b : builders) {
    if (b.global_tris.empty()) continue;
    scene.add_mesh(b.finish(positions));
  }
  if (scene.mesh_count() == 0) throw ObjParseError(0, "no faces found");
  return scene;
}

Scene load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw GeometryError("cannot open OBJ file " + path.string());
  return parse_obj(in, path.stem().string());
}

Real triangle_area(const Mesh& mesh, std::uint32_t tri_id) {
  const Vec3 e1 = mesh.corner(tri_id, 1) - mesh.corner(tri_id, 0);
  const Vec3 e2 = mesh.corner(tri_id, 2) - mesh.corner(tri_id, 0);
  return Real(0.5) * length(cross(e1, e2));
}

Real mesh_surface_area(const Mesh& mesh) {
  double total = 0;
  for (std::uint32_t t = 0; t < mesh.triangle_count(); ++t) total += triangle_area(mesh, t);
  return static_cast<Real>(total);
}

Adjacency build_adjacency(const Mesh& mesh) {
  Adjacency adj;
  for (std::uint32_t t = 0; t < mesh.triangle_count(); ++t) {
    for (std::uint8_t e = 0; e < 3; ++e) {
      const EdgeKey key = EdgeKey::make(mesh.indices[t][e], mesh.indices[t][(e + 1) % 3]);
      adj.edges[key].push_back({t, e});
    }
  }
  for (const auto& [key, uses] : adj.edges) {
    if (uses.size() > 2) adj.non_manifold.push_back(key);
  }
  return adj;
}

SurfacePoint sample_surface_point(std::uint32_t mesh_id, std::uint32_t tri_id, Real u1, Real u2) {
  const Real s = std::sqrt(u1);
  return {mesh_id, tri_id, {1 - s, s * (1 - u2), s * u2}};
}

Vec3 surface_position(const Scene& scene, const SurfacePoint& p) {
  return scene.mesh(p.mesh_id).interpolate(p.tri_id, p.bary);
}

Vec3 surface_normal(const Scene& scene, const SurfacePoint& p) {
  return scene.mesh(p.mesh_id).geometric_normal(p.tri_id);
}

GATE_NAMESPACE_END
