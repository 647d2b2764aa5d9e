#pragma once

#include <string>

#include "gate/camera.hpp"
#include "gate/geometry.hpp"

GATE_NAMESPACE_BEGIN

// Synthetic scenes used by tests, benchmarks and the CLI `--fixture` flag.

struct Fixture {
  Scene scene;
  Camera camera;
};

/// Unit square [0,1]^2 in the z = 0 plane facing +z, split into n x n cells of
/// two triangles each.
Mesh make_grid_quad(int n, Real size = 1, const std::string& name = "quad");

/// Icosahedron subdivided `levels` times and projected to a sphere.
Mesh make_icosphere(int levels, Real radius, const Vec3& center, const std::string& name = "sphere");

/// Axis-aligned box with inward-facing triangles (12 triangles).
Mesh make_room(const Vec3& lo, const Vec3& hi, const std::string& name = "room");

/// Subdivided unit quad (2 n^2 triangles).
Fixture make_quad_fixture(int n = 16);

/// Dihedral corner: a floor (y = 0) and a wall (z = 0), each n x n cells.
Fixture make_corner_fixture(int n = 8);

/// Teapot in the stadium: a 12-triangle room about 100x the size of an
/// embedded icosphere resting on its floor.
Fixture make_stadium_fixture(int sphere_levels = 3);

/// Mixed triangle sizes: a two-triangle floor and a finely tessellated sphere.
Fixture make_mixed_fixture(int sphere_levels = 3);

/// Fixture by CLI name: corner | quad | stadium | mixed.
Fixture make_fixture(const std::string& name);

GATE_NAMESPACE_END
