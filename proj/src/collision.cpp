#include "propd/collision.hpp"

#include "propd/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace propd {

Tolerances Tolerances::for_mesh(const TriMesh& B) {
  const double eps = 1e-4 * B.diagonal();
  return {eps, eps, 1e-6};
}

namespace {

// A placed at q: world-space vertices plus transformed node bounds.
struct PosedMesh {
  const TriMesh& mesh;
  Mat3 R;
  Vec3 t;
  std::vector<Vec3> world;
  Vec3 center = Vec3::Zero();

  PosedMesh(const TriMesh& m, const Configuration& q)
      : mesh(m), R(q.rotation_matrix()), t(q.translation) {
    world.reserve(m.vertex_count());
    for (const auto& p : m.vertices()) {
      world.push_back(R * p + t);
      center += world.back();
    }
    if (!world.empty()) center /= static_cast<double>(world.size());
  }

  TrianglePoints triangle(int k) const {
    const auto& f = mesh.triangle(k);
    return {world[f[0]], world[f[1]], world[f[2]]};
  }
  Aabb box(const BvhNode& node) const { return node.box.transformed(R, t); }
};

Aabb triangle_box(const TrianglePoints& T) {
  Aabb b;
  for (const auto& p : T) b.extend(p);
  return b;
}

CoplanarRule coplanar_rule(const TriMesh& A, const TriMesh& B) {
  return A.is_closed() && B.is_closed() ? CoplanarRule::solid : CoplanarRule::touching;
}

// Which node of a pair to split: the larger one, unless it is a leaf.
bool split_first(const BvhNode& a, const BvhNode& b) {
  if (b.is_leaf()) return true;
  if (a.is_leaf()) return false;
  return a.box.diagonal() >= b.box.diagonal();
}

ContactPair make_pair(const PosedMesh& pa, const TriMesh& B, int ta, int tb, const Vec3& bary_a,
                      const Vec3& bary_b, const Vec3& world_b, double gap) {
  ContactPair c;
  c.feature_a = {ta, bary_a};
  c.feature_b = {tb, bary_b};
  c.point_a = pa.mesh.point(c.feature_a);
  c.point_b = world_b;
  c.normal_a = pa.R * pa.mesh.surface_normal(c.feature_a);
  c.normal_b = B.surface_normal(c.feature_b);
  if (!B.is_closed()) {
    // An open sheet has no inside; face the normal towards A.
    Vec3 side = pa.R * c.point_a + pa.t - c.point_b;
    if (side.norm() <= 1e-12 * B.diagonal()) side = pa.center - c.point_b;
    if (side.dot(c.normal_b) < 0.0) c.normal_b = -c.normal_b;
  }
  c.gap = gap;
  return c;
}

bool posed_collision(const PosedMesh& pa, const TriMesh& B) {
  const auto rule = coplanar_rule(pa.mesh, B);
  const auto& na = pa.mesh.bvh().nodes();
  const auto& nb = B.bvh().nodes();
  std::vector<std::pair<int, int>> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [i, j] = stack.back();
    stack.pop_back();
    const BvhNode& a = na[i];
    const BvhNode& b = nb[j];
    if (!pa.box(a).overlaps(b.box, kTouchTolerance)) continue;
    if (a.is_leaf() && b.is_leaf()) {
      for (int ta : pa.mesh.bvh().leaf_triangles(a)) {
        const auto P = pa.triangle(ta);
        const Aabb pb = triangle_box(P);
        for (int tb : B.bvh().leaf_triangles(b)) {
          const auto Q = B.triangle_points(tb);
          if (!pb.overlaps(triangle_box(Q), kTouchTolerance)) continue;
          if (triangles_intersect(P, Q, rule)) return true;
        }
      }
      continue;
    }
    if (split_first(a, b)) {
      stack.emplace_back(a.left, j);
      stack.emplace_back(a.right, j);
    } else {
      stack.emplace_back(i, b.left);
      stack.emplace_back(i, b.right);
    }
  }
  return false;
}

}  // namespace

bool is_collision(const TriMesh& A, const Configuration& q, const TriMesh& B) {
  return posed_collision(PosedMesh(A, q), B);
}

DistanceResult min_distance(const TriMesh& A, const Configuration& q, const TriMesh& B) {
  const PosedMesh pa(A, q);
  const auto rule = coplanar_rule(A, B);
  const auto& na = A.bvh().nodes();
  const auto& nb = B.bvh().nodes();

  struct Item {
    int a, b;
    double bound;
  };
  double best = std::numeric_limits<double>::infinity();
  int best_a = -1, best_b = -1;
  TriangleDistance best_td;
  std::vector<Item> stack{{0, 0, pa.box(na[0]).distance(nb[0].box)}};
  while (!stack.empty()) {
    const Item item = stack.back();
    stack.pop_back();
    if (item.bound >= best) continue;
    const BvhNode& a = na[item.a];
    const BvhNode& b = nb[item.b];
    if (a.is_leaf() && b.is_leaf()) {
      for (int ta : A.bvh().leaf_triangles(a)) {
        const auto P = pa.triangle(ta);
        const Aabb pb = triangle_box(P);
        for (int tb : B.bvh().leaf_triangles(b)) {
          const auto Q = B.triangle_points(tb);
          const Aabb qb = triangle_box(Q);
          if (pb.overlaps(qb, kTouchTolerance) && triangles_intersect(P, Q, rule)) {
            throw PreconditionError("min_distance called on intersecting meshes");
          }
          if (pb.distance(qb) >= best) continue;
          const auto td = triangle_distance(P, Q);
          if (td.distance < best) {
            best = td.distance;
            best_td = td;
            best_a = ta;
            best_b = tb;
          }
        }
      }
      continue;
    }
    Item c1, c2;
    if (split_first(a, b)) {
      c1 = {a.left, item.b, pa.box(na[a.left]).distance(b.box)};
      c2 = {a.right, item.b, pa.box(na[a.right]).distance(b.box)};
    } else {
      const Aabb ab = pa.box(a);
      c1 = {item.a, b.left, ab.distance(nb[b.left].box)};
      c2 = {item.a, b.right, ab.distance(nb[b.right].box)};
    }
    if (c1.bound < c2.bound) std::swap(c1, c2);
    stack.push_back(c1);  // farther first, so the nearer pair is explored next
    stack.push_back(c2);
  }
  if (best <= kTouchTolerance && posed_collision(pa, B)) {
    throw PreconditionError("min_distance called on intersecting meshes");
  }
  DistanceResult r;
  r.distance = best;
  r.pair = make_pair(pa, B, best_a, best_b, best_td.bary_p, best_td.bary_q, best_td.point_q, best);
  return r;
}

std::vector<ContactPair> contact_pairs(const TriMesh& A, const Configuration& q, const TriMesh& B,
                                       double eps) {
  const PosedMesh pa(A, q);
  const auto& na = A.bvh().nodes();
  const auto& nb = B.bvh().nodes();
  std::vector<ContactPair> found;

  // All of T's vertices farther than eps on one side of U's plane.
  auto beyond_plane = [&](const TrianglePoints& T, const TrianglePoints& U) {
    const Vec3 n = (U[1] - U[0]).cross(U[2] - U[0]);
    const double len = n.norm();
    if (len == 0.0) return false;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& p : T) {
      const double h = n.dot(p - U[0]) / len;
      lo = std::min(lo, h);
      hi = std::max(hi, h);
    }
    return lo > eps || hi < -eps;
  };

  auto consider = [&](int ta, int tb, const TrianglePoints& P, const TrianglePoints& Q) {
    if (beyond_plane(P, Q) || beyond_plane(Q, P)) return;
    for (int i = 0; i < 3; ++i) {
      const auto c = closest_point_on_triangle(P[i], Q[0], Q[1], Q[2]);
      const double d = (c.point - P[i]).norm();
      if (d <= eps) found.push_back(make_pair(pa, B, ta, tb, Vec3::Unit(i), c.bary, c.point, d));
    }
    for (int j = 0; j < 3; ++j) {
      const auto c = closest_point_on_triangle(Q[j], P[0], P[1], P[2]);
      const double d = (c.point - Q[j]).norm();
      if (d <= eps) found.push_back(make_pair(pa, B, ta, tb, c.bary, Vec3::Unit(j), Q[j], d));
    }
    for (int i = 0; i < 3; ++i) {
      const int i1 = (i + 1) % 3;
      for (int j = 0; j < 3; ++j) {
        const int j1 = (j + 1) % 3;
        const auto c = closest_points_on_segments(P[i], P[i1], Q[j], Q[j1]);
        const double d = (c.p - c.q).norm();
        if (d > eps) continue;
        Vec3 ba = Vec3::Zero(), bb = Vec3::Zero();
        ba[i] = 1.0 - c.s;
        ba[i1] = c.s;
        bb[j] = 1.0 - c.t;
        bb[j1] = c.t;
        found.push_back(make_pair(pa, B, ta, tb, ba, bb, c.q, d));
      }
    }
  };

  std::vector<std::pair<int, int>> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [i, j] = stack.back();
    stack.pop_back();
    const BvhNode& a = na[i];
    const BvhNode& b = nb[j];
    if (!pa.box(a).overlaps(b.box, eps)) continue;
    if (a.is_leaf() && b.is_leaf()) {
      for (int ta : A.bvh().leaf_triangles(a)) {
        const auto P = pa.triangle(ta);
        const Aabb pb = triangle_box(P);
        for (int tb : B.bvh().leaf_triangles(b)) {
          const auto Q = B.triangle_points(tb);
          if (pb.overlaps(triangle_box(Q), eps)) consider(ta, tb, P, Q);
        }
      }
      continue;
    }
    if (split_first(a, b)) {
      stack.emplace_back(a.left, j);
      stack.emplace_back(a.right, j);
    } else {
      stack.emplace_back(i, b.left);
      stack.emplace_back(i, b.right);
    }
  }

  std::stable_sort(found.begin(), found.end(),
                   [](const ContactPair& x, const ContactPair& y) { return x.gap < y.gap; });
  std::vector<ContactPair> kept;
  const double merge = 2.0 * eps;
  for (const auto& c : found) {
    const bool duplicate = std::any_of(kept.begin(), kept.end(), [&](const ContactPair& k) {
      return (k.point_a - c.point_a).norm() <= merge && (k.point_b - c.point_b).norm() <= merge;
    });
    if (!duplicate) kept.push_back(c);
  }
  return kept;
}

namespace {

// Bound on how far any point of A travels per unit of the motion parameter.
double motion_rate(const TriMesh& A, const Configuration& q0, const Configuration& q1) {
  const double theta =
      q0.mode == Mode::generalized ? rotation_angle(q0.rotation.conjugate() * q1.rotation) : 0.0;
  return (q1.translation - q0.translation).norm() + theta * A.max_radius();
}

}  // namespace

CcdResult ccd_first_contact(const TriMesh& A, const Configuration& q_free,
                            const Configuration& q_hit, const TriMesh& B, const Tolerances& tol) {
  if (q_free.mode != q_hit.mode) throw PreconditionError("configurations of different modes");
  if (is_collision(A, q_free, B)) throw PreconditionError("CCD start configuration is in collision");
  if (!is_collision(A, q_hit, B)) throw PreconditionError("CCD end configuration is collision-free");

  constexpr int kAdvanceCap = 64;
  constexpr int kBisectCap = 80;
  const double rate = std::max(motion_rate(A, q_free, q_hit), 1e-300);
  auto at = [&](double t) { return interpolate(q_free, q_hit, t); };
  auto collides = [&](double t) { return is_collision(A, at(t), B); };

  CcdResult res;
  // Conservative advancement: the gap d cannot close over a parameter step
  // d / rate. Grazing motions advance slowly; the cap hands them to bisection.
  double t_lo = 0.0;
  for (int k = 0; k < kAdvanceCap; ++k) {
    ++res.iterations;
    const double d = min_distance(A, at(t_lo), B).distance;
    if (d <= tol.gap) break;
    const double next = t_lo + 0.95 * d / rate;
    if (next >= 1.0) break;
    t_lo = next;
  }

  for (int round = 0; round < 64; ++round) {
    // Doubling probes from t_lo to the first colliding parameter (t = 1 collides).
    double t_hi = 1.0;
    for (double h = tol.time, base = t_lo; base + h < 1.0; h *= 2.0) {
      if (collides(base + h)) {
        t_hi = base + h;
        break;
      }
      t_lo = base + h;
    }

    double gap = std::numeric_limits<double>::infinity();
    for (int k = 0; k < kBisectCap; ++k) {
      ++res.iterations;
      if (t_hi - t_lo <= 0.5 * tol.time) {
        gap = min_distance(A, at(t_lo), B).distance;
        if (gap <= tol.gap) break;
      }
      const double mid = 0.5 * (t_lo + t_hi);
      if (collides(mid)) {
        t_hi = mid;
      } else {
        t_lo = mid;
      }
    }
    if (gap <= 0.0) {
      // Exactly touching: step back inside the bracket tolerance.
      for (int k = 1; k <= 3; ++k) {
        const double back = t_lo - k * 0.125 * tol.time;
        if (back < 0.0 || collides(back)) break;
        const double g = min_distance(A, at(back), B).distance;
        if (g > 0.0 && g <= tol.gap) {
          t_lo = back;
          gap = g;
          break;
        }
      }
    }
    const double probe = std::min(t_lo + tol.time, 1.0);
    if (!collides(probe)) {
      // Passed a sliver thinner than the bracket; continue past it.
      t_lo = probe;
      continue;
    }
    res.hit = true;
    res.t_contact = t_lo;
    res.q_contact = at(t_lo);
    res.pair = min_distance(A, res.q_contact, B).pair;
    return res;
  }
  throw Error("CCD did not converge");
}

std::optional<CriticalConfiguration> critical_configuration(const TriMesh& A,
                                                            const Configuration& q,
                                                            const Configuration& q_slide,
                                                            const TriMesh& B,
                                                            const SurfacePoint& anchor,
                                                            const Tolerances& tol) {
  const Vec3 a = A.point(anchor);
  auto at = [&](double s) { return slide_interpolate(q, q_slide, a, s); };
  const double theta =
      q.mode == Mode::generalized ? rotation_angle(q.rotation.conjugate() * q_slide.rotation) : 0.0;
  const double rate = (apply(q_slide, a) - apply(q, a)).norm() + theta * (A.max_radius() + a.norm());

  constexpr int kCoarse = 8;
  double s_lo = 0.0, s_hi = -1.0;
  for (int k = 1; k <= kCoarse; ++k) {
    const double s = static_cast<double>(k) / kCoarse;
    if (is_collision(A, at(s), B)) {
      s_hi = s;
      break;
    }
    s_lo = s;
  }
  if (s_hi < 0.0) return std::nullopt;
  for (int k = 0; k < 80 && (s_hi - s_lo) * rate > 0.5 * tol.contact; ++k) {
    const double mid = 0.5 * (s_lo + s_hi);
    if (is_collision(A, at(mid), B)) {
      s_hi = mid;
    } else {
      s_lo = mid;
    }
  }

  CriticalConfiguration cc;
  cc.s = s_lo;
  cc.q = at(s_lo);
  const double away = 2.0 * tol.contact;
  for (auto& c : contact_pairs(A, cc.q, B, tol.contact)) {
    if ((c.point_a - a).norm() > away) cc.contacts.push_back(std::move(c));
  }
  if (cc.contacts.empty()) return std::nullopt;
  return cc;
}

}  // namespace propd
