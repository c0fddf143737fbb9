#pragma once

#include "propd/mesh.hpp"

#include <Eigen/Core>

#include <vector>

namespace propd::shapes {

/// Axis-aligned cube of the given edge length centred at the origin (12 triangles).
TriMesh cube(double size = 1.0);

/// Subdivided icosahedron projected onto the sphere of the given radius.
TriMesh icosphere(double radius = 1.0, int subdivisions = 3);

/// Icosphere with radial displacement r (1 + amplitude * sin(frequency x) sin(frequency y)
/// sin(frequency z)), giving many shallow concavities.
TriMesh bumpy_sphere(double radius = 1.0, double amplitude = 0.1, double frequency = 4.0,
                     int subdivisions = 3);

/// Torus around the z axis: major radius R, tube radius r, `major` x `minor`
/// quads split into two triangles each.
TriMesh torus(double R = 1.0, double r = 0.4, int major = 24, int minor = 12);

/// Open flat grid in the z = 0 plane, `cells` x `cells` squares of the given
/// spacing, centred at the origin, normals +z.
TriMesh grid(int cells = 10, double spacing = 0.1);

/// Inverted tetrahedron: apex at the origin, horizontal top face at z = height.
TriMesh tetrahedron(double size = 0.05, double height = 0.05);

/// Open cylinder (no caps) around the z axis, outward normals.
TriMesh open_cylinder(double radius = 1.0, double height = 1.0, int segments = 16,
                      int rings = 4);

/// Prism from a simple counter-clockwise polygon in the xy plane, extruded from
/// z = -depth/2 to z = depth/2. Caps are ear-clipped.
TriMesh extrude(const std::vector<Eigen::Vector2d>& polygon, double depth);

/// Staircase solid: `steps` steps of the given rise and run, `width` deep,
/// standing on z = 0 and climbing along +x.
TriMesh staircase(int steps = 4, double rise = 0.25, double run = 0.25, double width = 1.0);

/// Thin star prism in the xy plane: `points` tips at radius `outer`, notches at `inner`.
TriMesh star(int points = 5, double outer = 1.0, double inner = 0.45, double depth = 0.1);

/// Ear-clipping triangulation of a simple counter-clockwise polygon.
std::vector<Triangle> triangulate_polygon(const std::vector<Eigen::Vector2d>& polygon);

}  // namespace propd::shapes
