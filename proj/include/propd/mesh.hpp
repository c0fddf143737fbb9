#pragma once

#include "propd/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace propd {

using Triangle = std::array<int, 3>;

/// A point on a mesh surface: triangle index plus barycentric weights.
struct SurfacePoint {
  int triangle = -1;
  Vec3 bary = Vec3::Zero();
};

struct BvhNode {
  Aabb box;
  int left = -1;
  int right = -1;
  int first = 0;  // into Bvh::order()
  int count = 0;  // > 0 for leaves

  bool is_leaf() const { return count > 0; }
};

/// Binary AABB tree over triangles: median split on the longest axis of the
/// centroid bounds, at most kLeafSize triangles per leaf. Node 0 is the root.
class Bvh {
 public:
  static constexpr int kLeafSize = 4;

  Bvh() = default;
  Bvh(const std::vector<Vec3>& vertices, const std::vector<Triangle>& triangles);

  const std::vector<BvhNode>& nodes() const { return nodes_; }
  const BvhNode& root() const { return nodes_.front(); }
  std::span<const int> leaf_triangles(const BvhNode& leaf) const {
    return {order_.data() + leaf.first, static_cast<std::size_t>(leaf.count)};
  }

 private:
  int build(const std::vector<Vec3>& vertices, const std::vector<Triangle>& triangles,
            const std::vector<Vec3>& centroids, int first, int count);

  std::vector<BvhNode> nodes_;
  std::vector<int> order_;
};

/// Indexed triangle mesh with the derived data the collision and sampling code
/// needs. Immutable once built.
class TriMesh {
 public:
  /// Degenerate triangles (repeated indices or area below kMinTriangleArea) are
  /// dropped and unreferenced vertices compacted away.
  static constexpr double kMinTriangleArea = 1e-12;

  TriMesh() = default;

  /// Throws GeometryError for out-of-range indices, non-finite coordinates or
  /// when nothing is left after filtering.
  static TriMesh build(std::vector<Vec3> vertices, std::vector<Triangle> triangles);

  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t triangle_count() const { return triangles_.size(); }
  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const Vec3& vertex(int v) const { return vertices_[v]; }
  const Triangle& triangle(int t) const { return triangles_[t]; }
  TrianglePoints triangle_points(int t) const {
    const auto& f = triangles_[t];
    return {vertices_[f[0]], vertices_[f[1]], vertices_[f[2]]};
  }

  /// Sorted one-ring of v in the edge graph.
  std::span<const int> neighbors(int v) const { return adjacency_[v]; }
  std::span<const int> incident_triangles(int v) const { return vertex_triangles_[v]; }
  bool adjacent(int u, int v) const;
  /// Triangles sharing the undirected edge (u, v).
  std::vector<int> edge_triangles(int u, int v) const;

  /// Angle-weighted vertex normal; throws GeometryError if undefined.
  const Vec3& vertex_normal(int v) const;
  bool has_vertex_normal(int v) const { return normal_defined_[v] != 0; }
  const Vec3& triangle_normal(int t) const { return triangle_normals_[t]; }
  double triangle_area(int t) const { return triangle_areas_[t]; }

  Vec3 point(const SurfacePoint& sp) const;
  /// Normal of the lowest-dimensional feature containing the point: vertex
  /// normal at a corner, averaged face normal on an edge, face normal inside.
  Vec3 surface_normal(const SurfacePoint& sp) const;
  /// Vertex of sp's triangle closest to the point.
  int nearest_corner(const SurfacePoint& sp) const;

  double max_incident_edge_length(int v) const;
  double mean_edge_length() const { return mean_edge_length_; }

  const Bvh& bvh() const { return bvh_; }
  const Aabb& bounds() const { return bounds_; }
  double diagonal() const { return bounds_.diagonal(); }
  /// Largest vertex distance from the body-frame origin.
  double max_radius() const { return max_radius_; }
  /// Every edge shared by exactly two triangles.
  bool is_closed() const { return closed_; }
  /// 64-bit FNV-1a over the canonical vertex/triangle byte stream.
  std::uint64_t hash() const { return hash_; }

 private:
  std::vector<Vec3> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<std::vector<int>> adjacency_;
  std::vector<std::vector<int>> vertex_triangles_;
  std::vector<Vec3> vertex_normals_;
  std::vector<char> normal_defined_;
  std::vector<Vec3> triangle_normals_;
  std::vector<double> triangle_areas_;
  std::vector<std::pair<std::uint64_t, int>> edges_;  // (edge key, triangle), sorted
  Bvh bvh_;
  Aabb bounds_;
  double max_radius_ = 0.0;
  double mean_edge_length_ = 0.0;
  bool closed_ = false;
  std::uint64_t hash_ = 0;
};

struct MassProperties {
  double volume = 0.0;
  Vec3 centroid = Vec3::Zero();
  /// Integral of p p^T over the body (not centred).
  Mat3 second_moment = Mat3::Zero();
  /// Set when the mesh is open and the moments were integrated over the
  /// surface (area-weighted) instead of the enclosed volume.
  bool surface_fallback = false;
};

/// Exact polynomial integration over the tetrahedra spanned by the origin and
/// each triangle. Throws GeometryError if a closed mesh has non-positive volume.
MassProperties mass_properties(const TriMesh& mesh);

/// Vertices whose edge-graph geodesic distance from v lies in [d/2, 3d/2]. When
/// d does not exceed the longest edge incident to v the one-ring is returned.
std::vector<int> vertex_neighbors_at_step(const TriMesh& mesh, int v, double d);

/// Loads an ASCII OFF or Wavefront OBJ file (by extension). Polygons are fan
/// triangulated.
TriMesh load_mesh(const std::filesystem::path& path);
void save_off(const TriMesh& mesh, const std::filesystem::path& path);

std::uint64_t fnv1a_hash(const std::vector<Vec3>& vertices,
                         const std::vector<Triangle>& triangles);

}  // namespace propd
