#pragma once

// Reference computations for the unit and acceptance tests. They share no code
// with the library beyond the mesh container.

#include "propd/mesh.hpp"
#include "propd/random.hpp"
#include "propd/transforms.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace testsupport {

using propd::Mat3;
using propd::TrianglePoints;
using propd::Vec3;

/// Open segment p0-p1 crosses the open triangle (a, b, c) at a single point
/// (Moller-Trumbore with strict interior tests).
inline bool segment_crosses_triangle(const Vec3& p0, const Vec3& p1, const Vec3& a, const Vec3& b,
                                     const Vec3& c) {
  const Vec3 dir = p1 - p0;
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 h = dir.cross(e2);
  const double det = e1.dot(h);
  if (std::abs(det) < 1e-14 * e1.norm() * e2.norm() * dir.norm()) return false;
  const double inv = 1.0 / det;
  const Vec3 s = p0 - a;
  const double u = inv * s.dot(h);
  if (u <= 0.0 || u >= 1.0) return false;
  const Vec3 qv = s.cross(e1);
  const double v = inv * dir.dot(qv);
  if (v <= 0.0 || u + v >= 1.0) return false;
  const double t = inv * e2.dot(qv);
  return t > 0.0 && t < 1.0;
}

/// Two triangles in general position intersect iff an edge of one crosses the
/// other.
inline bool triangles_cross(const TrianglePoints& P, const TrianglePoints& Q) {
  for (int i = 0; i < 3; ++i) {
    if (segment_crosses_triangle(P[i], P[(i + 1) % 3], Q[0], Q[1], Q[2])) return true;
    if (segment_crosses_triangle(Q[i], Q[(i + 1) % 3], P[0], P[1], P[2])) return true;
  }
  return false;
}

inline TrianglePoints posed_triangle(const propd::TriMesh& m, int t, const propd::Configuration& q) {
  const auto& f = m.triangle(t);
  const Mat3 R = q.rotation.toRotationMatrix();
  return {R * m.vertex(f[0]) + q.translation, R * m.vertex(f[1]) + q.translation,
          R * m.vertex(f[2]) + q.translation};
}

/// All-pairs surface intersection test.
inline bool all_pairs_collision(const propd::TriMesh& A, const propd::Configuration& q,
                                const propd::TriMesh& B) {
  for (std::size_t i = 0; i < A.triangle_count(); ++i) {
    const auto P = posed_triangle(A, static_cast<int>(i), q);
    for (std::size_t j = 0; j < B.triangle_count(); ++j) {
      if (triangles_cross(P, B.triangle_points(static_cast<int>(j)))) return true;
    }
  }
  return false;
}

/// Parity of crossings of a ray in a fixed generic direction.
inline bool inside_mesh(const propd::TriMesh& m, const Vec3& p) {
  const Vec3 dir = Vec3(0.5377, 0.8322, 0.1347).normalized();
  const double far = 4.0 * (m.diagonal() + (p - m.bounds().center()).norm());
  int crossings = 0;
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    const auto T = m.triangle_points(static_cast<int>(t));
    if (segment_crosses_triangle(p, p + far * dir, T[0], T[1], T[2])) ++crossings;
  }
  return crossings % 2 == 1;
}

/// Uniform points inside a closed mesh by rejection from its bounding box.
inline std::vector<Vec3> points_inside(const propd::TriMesh& m, std::size_t n, propd::Rng& rng) {
  std::vector<Vec3> pts;
  pts.reserve(n);
  while (pts.size() < n) {
    const Vec3 p = rng.uniform_in_box(m.bounds().lo, m.bounds().hi);
    if (inside_mesh(m, p)) pts.push_back(p);
  }
  return pts;
}

struct MeanEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Monte-Carlo estimate of the object norm: root of the mean squared
/// displacement of body points between the two poses. The standard error is
/// propagated through the square root.
inline MeanEstimate object_norm_mc(const std::vector<Vec3>& body, const propd::Configuration& a,
                                   const propd::Configuration& b) {
  const Mat3 Ra = a.rotation.toRotationMatrix(), Rb = b.rotation.toRotationMatrix();
  double sum = 0.0, sum2 = 0.0;
  for (const auto& p : body) {
    const double d2 = ((Ra * p + a.translation) - (Rb * p + b.translation)).squaredNorm();
    sum += d2;
    sum2 += d2 * d2;
  }
  const double n = static_cast<double>(body.size());
  const double mean = sum / n;
  const double var = std::max(0.0, sum2 / n - mean * mean);
  const double se2 = std::sqrt(var / n);
  MeanEstimate e;
  e.mean = std::sqrt(mean);
  e.standard_error = e.mean > 0.0 ? se2 / (2.0 * e.mean) : std::sqrt(se2);
  return e;
}

inline propd::TriMesh transformed(const propd::TriMesh& m, const Mat3& R, const Vec3& t = Vec3::Zero()) {
  std::vector<Vec3> v;
  for (const auto& p : m.vertices()) v.push_back(R * p + t);
  return propd::TriMesh::build(std::move(v), m.triangles());
}

/// The linked torus pair: B is the default torus around z, A the same torus
/// turned a quarter about x.
inline propd::TriMesh turned_torus(const propd::TriMesh& torus) {
  Mat3 R;
  R << 1, 0, 0, 0, 0, -1, 0, 1, 0;
  return transformed(torus, R);
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("propd_test_" + name);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  f << s;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace testsupport
