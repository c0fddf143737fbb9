#include "propd/mesh.hpp"

#include "propd/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <queue>

namespace propd {

namespace {

std::uint64_t edge_key(int u, int v) {
  const auto a = static_cast<std::uint32_t>(std::min(u, v));
  const auto b = static_cast<std::uint32_t>(std::max(u, v));
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

double corner_angle(const Vec3& at, const Vec3& p, const Vec3& q) {
  const Vec3 a = p - at, b = q - at;
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

}  // namespace

// ---------------------------------------------------------------------------
// Bvh

Bvh::Bvh(const std::vector<Vec3>& vertices, const std::vector<Triangle>& triangles) {
  if (triangles.empty()) return;
  std::vector<Vec3> centroids(triangles.size());
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    const auto& f = triangles[t];
    centroids[t] = (vertices[f[0]] + vertices[f[1]] + vertices[f[2]]) / 3.0;
  }
  order_.resize(triangles.size());
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * triangles.size() / kLeafSize + 2);
  build(vertices, triangles, centroids, 0, static_cast<int>(triangles.size()));
}

int Bvh::build(const std::vector<Vec3>& vertices, const std::vector<Triangle>& triangles,
               const std::vector<Vec3>& centroids, int first, int count) {
  const int index = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Aabb box, centroid_box;
  for (int i = first; i < first + count; ++i) {
    const auto& f = triangles[order_[i]];
    for (int k = 0; k < 3; ++k) box.extend(vertices[f[k]]);
    centroid_box.extend(centroids[order_[i]]);
  }
  nodes_[index].box = box;
  if (count <= kLeafSize) {
    nodes_[index].first = first;
    nodes_[index].count = count;
    return index;
  }
  int axis = 0;
  centroid_box.extent().maxCoeff(&axis);
  const int half = count / 2;
  auto begin = order_.begin() + first;
  std::nth_element(begin, begin + half, begin + count, [&](int a, int b) {
    if (centroids[a][axis] != centroids[b][axis]) return centroids[a][axis] < centroids[b][axis];
    return a < b;
  });
  const int left = build(vertices, triangles, centroids, first, half);
  const int right = build(vertices, triangles, centroids, first + half, count - half);
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

// ---------------------------------------------------------------------------
// TriMesh

TriMesh TriMesh::build(std::vector<Vec3> vertices, std::vector<Triangle> triangles) {
  for (const auto& p : vertices) {
    if (!p.allFinite()) throw GeometryError("mesh has a non-finite vertex coordinate");
  }
  const int nv = static_cast<int>(vertices.size());
  std::vector<Triangle> kept;
  kept.reserve(triangles.size());
  for (const auto& f : triangles) {
    for (int k = 0; k < 3; ++k) {
      if (f[k] < 0 || f[k] >= nv) throw GeometryError("triangle index out of range");
    }
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) continue;
    const double area =
        0.5 * (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]).norm();
    if (!(area >= kMinTriangleArea)) continue;
    kept.push_back(f);
  }
  if (kept.empty()) throw GeometryError("mesh has no non-degenerate triangles");

  // Compact away unreferenced vertices, preserving order.
  std::vector<int> remap(nv, -1);
  for (const auto& f : kept)
    for (int k = 0; k < 3; ++k) remap[f[k]] = 0;
  int next = 0;
  std::vector<Vec3> used;
  for (int v = 0; v < nv; ++v) {
    if (remap[v] == 0) {
      remap[v] = next++;
      used.push_back(vertices[v]);
    }
  }
  for (auto& f : kept)
    for (int k = 0; k < 3; ++k) f[k] = remap[f[k]];

  TriMesh m;
  m.vertices_ = std::move(used);
  m.triangles_ = std::move(kept);
  const auto n = m.vertices_.size();
  const auto nt = m.triangles_.size();

  m.adjacency_.assign(n, {});
  m.vertex_triangles_.assign(n, {});
  m.triangle_normals_.resize(nt);
  m.triangle_areas_.resize(nt);
  m.edges_.reserve(3 * nt);
  for (std::size_t t = 0; t < nt; ++t) {
    const auto& f = m.triangles_[t];
    const Vec3 c = (m.vertices_[f[1]] - m.vertices_[f[0]]).cross(m.vertices_[f[2]] - m.vertices_[f[0]]);
    m.triangle_areas_[t] = 0.5 * c.norm();
    m.triangle_normals_[t] = c.normalized();
    for (int k = 0; k < 3; ++k) {
      const int u = f[k], v = f[(k + 1) % 3];
      m.adjacency_[u].push_back(v);
      m.adjacency_[v].push_back(u);
      m.vertex_triangles_[f[k]].push_back(static_cast<int>(t));
      m.edges_.emplace_back(edge_key(u, v), static_cast<int>(t));
    }
  }
  for (auto& adj : m.adjacency_) {
    std::sort(adj.begin(), adj.end());
    adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
  }
  std::sort(m.edges_.begin(), m.edges_.end());

  m.closed_ = true;
  double edge_sum = 0.0;
  std::size_t edge_count = 0;
  for (std::size_t i = 0; i < m.edges_.size();) {
    std::size_t j = i;
    while (j < m.edges_.size() && m.edges_[j].first == m.edges_[i].first) ++j;
    if (j - i != 2) m.closed_ = false;
    const int u = static_cast<int>(m.edges_[i].first >> 32);
    const int v = static_cast<int>(m.edges_[i].first & 0xffffffffu);
    edge_sum += (m.vertices_[u] - m.vertices_[v]).norm();
    ++edge_count;
    i = j;
  }
  m.mean_edge_length_ = edge_count ? edge_sum / static_cast<double>(edge_count) : 0.0;

  m.vertex_normals_.assign(n, Vec3::Zero());
  m.normal_defined_.assign(n, 0);
  for (std::size_t t = 0; t < nt; ++t) {
    const auto& f = m.triangles_[t];
    for (int k = 0; k < 3; ++k) {
      const double angle = corner_angle(m.vertices_[f[k]], m.vertices_[f[(k + 1) % 3]],
                                        m.vertices_[f[(k + 2) % 3]]);
      m.vertex_normals_[f[k]] += angle * m.triangle_normals_[t];
    }
  }
  for (std::size_t v = 0; v < n; ++v) {
    const double len = m.vertex_normals_[v].norm();
    if (len > 1e-12) {
      m.vertex_normals_[v] /= len;
      m.normal_defined_[v] = 1;
    }
  }

  for (const auto& p : m.vertices_) {
    m.bounds_.extend(p);
    m.max_radius_ = std::max(m.max_radius_, p.norm());
  }
  m.bvh_ = Bvh(m.vertices_, m.triangles_);
  m.hash_ = fnv1a_hash(m.vertices_, m.triangles_);
  return m;
}

bool TriMesh::adjacent(int u, int v) const {
  const auto& adj = adjacency_[u];
  return std::binary_search(adj.begin(), adj.end(), v);
}

std::vector<int> TriMesh::edge_triangles(int u, int v) const {
  const auto key = edge_key(u, v);
  std::vector<int> out;
  auto it = std::lower_bound(edges_.begin(), edges_.end(), std::make_pair(key, -1));
  for (; it != edges_.end() && it->first == key; ++it) out.push_back(it->second);
  return out;
}

const Vec3& TriMesh::vertex_normal(int v) const {
  if (!normal_defined_[v]) {
    throw GeometryError("vertex normal undefined at vertex " + std::to_string(v));
  }
  return vertex_normals_[v];
}

Vec3 TriMesh::point(const SurfacePoint& sp) const {
  const auto& f = triangles_[sp.triangle];
  return sp.bary[0] * vertices_[f[0]] + sp.bary[1] * vertices_[f[1]] +
         sp.bary[2] * vertices_[f[2]];
}

Vec3 TriMesh::surface_normal(const SurfacePoint& sp) const {
  constexpr double kOnFeature = 1e-9;
  const auto& f = triangles_[sp.triangle];
  int zeros = 0, nonzero[3], nz = 0;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(sp.bary[k]) <= kOnFeature) {
      ++zeros;
    } else {
      nonzero[nz++] = k;
    }
  }
  if (zeros >= 2 && nz == 1 && normal_defined_[f[nonzero[0]]]) {
    return vertex_normals_[f[nonzero[0]]];
  }
  if (zeros == 1) {
    Vec3 n = Vec3::Zero();
    for (int t : edge_triangles(f[nonzero[0]], f[nonzero[1]])) n += triangle_normals_[t];
    if (n.norm() > 1e-12) return n.normalized();
  }
  return triangle_normals_[sp.triangle];
}

int TriMesh::nearest_corner(const SurfacePoint& sp) const {
  int k = 0;
  sp.bary.maxCoeff(&k);
  return triangles_[sp.triangle][k];
}

double TriMesh::max_incident_edge_length(int v) const {
  double longest = 0.0;
  for (int u : adjacency_[v]) longest = std::max(longest, (vertices_[u] - vertices_[v]).norm());
  return longest;
}

// ---------------------------------------------------------------------------

MassProperties mass_properties(const TriMesh& mesh) {
  MassProperties mp;
  Vec3 first = Vec3::Zero();
  Mat3 second = Mat3::Zero();
  double measure = 0.0;
  if (mesh.is_closed()) {
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
      const auto [a, b, c] = mesh.triangle_points(static_cast<int>(t));
      const double det = a.dot(b.cross(c));
      const Vec3 s = a + b + c;
      measure += det / 6.0;
      first += det / 24.0 * s;
      second += det / 120.0 *
                (a * a.transpose() + b * b.transpose() + c * c.transpose() + s * s.transpose());
    }
    if (!(measure > 0.0)) {
      throw GeometryError("closed mesh has non-positive volume (inverted orientation?)");
    }
  } else {
    mp.surface_fallback = true;
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
      const auto [a, b, c] = mesh.triangle_points(static_cast<int>(t));
      const double area = mesh.triangle_area(static_cast<int>(t));
      const Vec3 s = a + b + c;
      measure += area;
      first += area / 3.0 * s;
      second += area / 12.0 *
                (a * a.transpose() + b * b.transpose() + c * c.transpose() + s * s.transpose());
    }
  }
  mp.volume = measure;
  mp.centroid = first / measure;
  mp.second_moment = 0.5 * (second + second.transpose());
  return mp;
}

std::vector<int> vertex_neighbors_at_step(const TriMesh& mesh, int v, double d) {
  if (!(d > 0.0)) throw PreconditionError("step length must be positive");
  const auto ring = mesh.neighbors(v);
  if (d <= mesh.max_incident_edge_length(v)) return {ring.begin(), ring.end()};

  // Path sums carry rounding, so the band edges get a relative slack.
  const double slack = 1e-12 * d;
  const double lo = 0.5 * d - slack, hi = 1.5 * d + slack;
  std::vector<double> dist(mesh.vertex_count(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  dist[v] = 0.0;
  open.emplace(0.0, v);
  std::vector<int> band;
  while (!open.empty()) {
    const auto [du, u] = open.top();
    open.pop();
    if (du > dist[u]) continue;
    if (u != v && du >= lo) band.push_back(u);
    for (int w : mesh.neighbors(u)) {
      const double dw = du + (mesh.vertex(u) - mesh.vertex(w)).norm();
      if (dw <= hi && dw < dist[w]) {
        dist[w] = dw;
        open.emplace(dw, w);
      }
    }
  }
  std::sort(band.begin(), band.end());
  return band;
}

std::uint64_t fnv1a_hash(const std::vector<Vec3>& vertices,
                         const std::vector<Triangle>& triangles) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ull;
    }
  };
  auto feed_u64 = [&](std::uint64_t x) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
    feed(b, 8);
  };
  feed_u64(vertices.size());
  for (const auto& p : vertices) {
    for (int k = 0; k < 3; ++k) {
      std::uint64_t bits;
      const double x = p[k] == 0.0 ? 0.0 : p[k];  // fold -0.0
      std::memcpy(&bits, &x, sizeof bits);
      feed_u64(bits);
    }
  }
  feed_u64(triangles.size());
  for (const auto& f : triangles) {
    for (int k = 0; k < 3; ++k) {
      const auto x = static_cast<std::uint32_t>(f[k]);
      unsigned char b[4];
      for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
      feed(b, 4);
    }
  }
  return h;
}

}  // namespace propd
