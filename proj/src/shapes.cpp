#include "propd/shapes.hpp"

#include "propd/error.hpp"

#include <cmath>
#include <map>
#include <numbers>

namespace propd::shapes {

namespace {

constexpr double kPi = std::numbers::pi;

void add_quad(std::vector<Triangle>& tris, int a, int b, int c, int d) {
  tris.push_back({a, b, c});
  tris.push_back({a, c, d});
}

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

}  // namespace

TriMesh cube(double size) {
  const double h = 0.5 * size;
  std::vector<Vec3> v;
  for (int i = 0; i < 8; ++i) v.emplace_back(i & 1 ? h : -h, i & 2 ? h : -h, i & 4 ? h : -h);
  std::vector<Triangle> t;
  add_quad(t, 0, 2, 3, 1);  // -z
  add_quad(t, 4, 5, 7, 6);  // +z
  add_quad(t, 0, 1, 5, 4);  // -y
  add_quad(t, 2, 6, 7, 3);  // +y
  add_quad(t, 0, 4, 6, 2);  // -x
  add_quad(t, 1, 3, 7, 5);  // +x
  return TriMesh::build(std::move(v), std::move(t));
}

namespace {

struct Icosahedron {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
};

Icosahedron subdivided_icosahedron(int subdivisions) {
  const double p = (1.0 + std::sqrt(5.0)) / 2.0;
  Icosahedron ico;
  ico.vertices = {{-1, p, 0}, {1, p, 0}, {-1, -p, 0}, {1, -p, 0}, {0, -1, p}, {0, 1, p},
                  {0, -1, -p}, {0, 1, -p}, {p, 0, -1}, {p, 0, 1}, {-p, 0, -1}, {-p, 0, 1}};
  for (auto& x : ico.vertices) x.normalize();
  ico.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                   {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                   {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                   {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      ico.vertices.push_back((ico.vertices[a] + ico.vertices[b]).normalized());
      const int id = static_cast<int>(ico.vertices.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<Triangle> next;
    next.reserve(4 * ico.triangles.size());
    for (const auto& f : ico.triangles) {
      const int a = mid(f[0], f[1]), b = mid(f[1], f[2]), c = mid(f[2], f[0]);
      next.push_back({f[0], a, c});
      next.push_back({f[1], b, a});
      next.push_back({f[2], c, b});
      next.push_back({a, b, c});
    }
    ico.triangles = std::move(next);
  }
  return ico;
}

}  // namespace

TriMesh icosphere(double radius, int subdivisions) {
  if (!(radius > 0.0) || subdivisions < 0) throw PreconditionError("invalid icosphere parameters");
  auto ico = subdivided_icosahedron(subdivisions);
  for (auto& x : ico.vertices) x *= radius;
  return TriMesh::build(std::move(ico.vertices), std::move(ico.triangles));
}

TriMesh bumpy_sphere(double radius, double amplitude, double frequency, int subdivisions) {
  if (!(radius > 0.0) || subdivisions < 0 || !(std::abs(amplitude) < 1.0)) {
    throw PreconditionError("invalid bumpy sphere parameters");
  }
  auto ico = subdivided_icosahedron(subdivisions);
  for (auto& x : ico.vertices) {
    const double bump = std::sin(frequency * x.x()) * std::sin(frequency * x.y()) *
                        std::sin(frequency * x.z());
    x *= radius * (1.0 + amplitude * bump);
  }
  return TriMesh::build(std::move(ico.vertices), std::move(ico.triangles));
}

TriMesh torus(double R, double r, int major, int minor) {
  if (!(r > 0.0) || !(R > r) || major < 3 || minor < 3) {
    throw PreconditionError("invalid torus parameters");
  }
  std::vector<Vec3> v;
  v.reserve(static_cast<std::size_t>(major) * minor);
  for (int i = 0; i < major; ++i) {
    const double u = 2.0 * kPi * i / major;
    for (int j = 0; j < minor; ++j) {
      const double w = 2.0 * kPi * j / minor;
      const double ring = R + r * std::cos(w);
      v.emplace_back(ring * std::cos(u), ring * std::sin(u), r * std::sin(w));
    }
  }
  auto id = [&](int i, int j) { return (i % major) * minor + (j % minor); };
  std::vector<Triangle> t;
  for (int i = 0; i < major; ++i) {
    for (int j = 0; j < minor; ++j) add_quad(t, id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
  }
  return TriMesh::build(std::move(v), std::move(t));
}

TriMesh grid(int cells, double spacing) {
  if (cells < 1 || !(spacing > 0.0)) throw PreconditionError("invalid grid parameters");
  const double half = 0.5 * cells * spacing;
  std::vector<Vec3> v;
  for (int j = 0; j <= cells; ++j) {
    for (int i = 0; i <= cells; ++i) v.emplace_back(i * spacing - half, j * spacing - half, 0.0);
  }
  auto id = [&](int i, int j) { return j * (cells + 1) + i; };
  std::vector<Triangle> t;
  for (int j = 0; j < cells; ++j) {
    for (int i = 0; i < cells; ++i) add_quad(t, id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
  }
  return TriMesh::build(std::move(v), std::move(t));
}

TriMesh tetrahedron(double size, double height) {
  if (!(size > 0.0) || !(height > 0.0)) throw PreconditionError("invalid tetrahedron parameters");
  std::vector<Vec3> v{Vec3::Zero()};
  for (int k = 0; k < 3; ++k) {
    const double a = 2.0 * kPi * k / 3.0;
    v.emplace_back(size * std::cos(a), size * std::sin(a), height);
  }
  std::vector<Triangle> t{{1, 2, 3}, {0, 2, 1}, {0, 3, 2}, {0, 1, 3}};
  return TriMesh::build(std::move(v), std::move(t));
}

TriMesh open_cylinder(double radius, double height, int segments, int rings) {
  if (!(radius > 0.0) || !(height > 0.0) || segments < 3 || rings < 1) {
    throw PreconditionError("invalid cylinder parameters");
  }
  std::vector<Vec3> v;
  for (int j = 0; j <= rings; ++j) {
    const double z = height * j / rings - 0.5 * height;
    for (int i = 0; i < segments; ++i) {
      const double a = 2.0 * kPi * i / segments;
      v.emplace_back(radius * std::cos(a), radius * std::sin(a), z);
    }
  }
  auto id = [&](int i, int j) { return j * segments + i % segments; };
  std::vector<Triangle> t;
  for (int j = 0; j < rings; ++j) {
    for (int i = 0; i < segments; ++i) add_quad(t, id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
  }
  return TriMesh::build(std::move(v), std::move(t));
}

std::vector<Triangle> triangulate_polygon(const std::vector<Eigen::Vector2d>& polygon) {
  const int n = static_cast<int>(polygon.size());
  if (n < 3) throw GeometryError("polygon needs at least 3 vertices");
  std::vector<int> ring(n);
  for (int i = 0; i < n; ++i) ring[i] = i;
  std::vector<Triangle> out;
  auto inside = [&](const Eigen::Vector2d& p, int a, int b, int c) {
    const auto &A = polygon[a], &B = polygon[b], &C = polygon[c];
    return cross2(B - A, p - A) >= 0.0 && cross2(C - B, p - B) >= 0.0 &&
           cross2(A - C, p - C) >= 0.0;
  };
  while (ring.size() > 3) {
    const int m = static_cast<int>(ring.size());
    bool clipped = false;
    for (int k = 0; k < m; ++k) {
      const int a = ring[(k + m - 1) % m], b = ring[k], c = ring[(k + 1) % m];
      if (cross2(polygon[b] - polygon[a], polygon[c] - polygon[b]) <= 0.0) continue;
      bool ear = true;
      for (int other : ring) {
        if (other == a || other == b || other == c) continue;
        if (inside(polygon[other], a, b, c)) {
          ear = false;
          break;
        }
      }
      if (!ear) continue;
      out.push_back({a, b, c});
      ring.erase(ring.begin() + k);
      clipped = true;
      break;
    }
    if (!clipped) throw GeometryError("polygon is not simple or not counter-clockwise");
  }
  out.push_back({ring[0], ring[1], ring[2]});
  return out;
}

TriMesh extrude(const std::vector<Eigen::Vector2d>& polygon, double depth) {
  if (!(depth > 0.0)) throw PreconditionError("extrusion depth must be positive");
  const int n = static_cast<int>(polygon.size());
  const auto cap = triangulate_polygon(polygon);
  std::vector<Vec3> v;
  for (const auto& p : polygon) v.emplace_back(p.x(), p.y(), -0.5 * depth);
  for (const auto& p : polygon) v.emplace_back(p.x(), p.y(), 0.5 * depth);
  std::vector<Triangle> t;
  for (const auto& f : cap) {
    t.push_back({f[0] + n, f[1] + n, f[2] + n});
    t.push_back({f[0], f[2], f[1]});
  }
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    add_quad(t, i, j, j + n, i + n);
  }
  return TriMesh::build(std::move(v), std::move(t));
}

TriMesh staircase(int steps, double rise, double run, double width) {
  if (steps < 1 || !(rise > 0.0) || !(run > 0.0) || !(width > 0.0)) {
    throw PreconditionError("invalid staircase parameters");
  }
  std::vector<Eigen::Vector2d> profile{{0.0, 0.0}, {steps * run, 0.0}, {steps * run, steps * rise}};
  for (int k = steps - 1; k >= 0; --k) {
    profile.emplace_back(k * run, (k + 1) * rise);
    if (k > 0) profile.emplace_back(k * run, k * rise);
  }
  const TriMesh prism = extrude(profile, width);
  // Profile plane xy -> xz (rotation about x), so the treads face +z.
  std::vector<Vec3> v;
  for (const auto& p : prism.vertices()) v.emplace_back(p.x(), -p.z(), p.y());
  return TriMesh::build(std::move(v), prism.triangles());
}

TriMesh star(int points, double outer, double inner, double depth) {
  if (points < 3 || !(inner > 0.0) || !(outer > inner)) {
    throw PreconditionError("invalid star parameters");
  }
  std::vector<Eigen::Vector2d> profile;
  for (int k = 0; k < 2 * points; ++k) {
    const double a = kPi * k / points + 0.5 * kPi;
    const double rad = k % 2 == 0 ? outer : inner;
    profile.emplace_back(rad * std::cos(a), rad * std::sin(a));
  }
  return extrude(profile, depth);
}

}  // namespace propd::shapes
