#include "propd/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace propd {

ClosestOnTriangle closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                            const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return {a, {1, 0, 0}};

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return {b, {0, 1, 0}};

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return {a + v * ab, {1 - v, v, 0}};
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return {c, {0, 0, 1}};

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return {a + w * ac, {1 - w, 0, w}};
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return {b + w * (c - b), {0, 1 - w, w}};
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return {a + ab * v + ac * w, {1 - v - w, v, w}};
}

ClosestOnSegments closest_points_on_segments(const Vec3& p0, const Vec3& p1, const Vec3& q0,
                                             const Vec3& q1) {
  constexpr double kTiny = 1e-300;
  const Vec3 d1 = p1 - p0, d2 = q1 - q0, r = p0 - q0;
  const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
  double s = 0.0, t = 0.0;
  if (a <= kTiny && e <= kTiny) {
    // both degenerate
  } else if (a <= kTiny) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= kTiny) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > 0.0 ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return {s, t, p0 + s * d1, q0 + t * d2};
}

namespace {

int side_of(double d) {
  if (d > kTouchTolerance) return 1;
  if (d < -kTouchTolerance) return -1;
  return 0;
}

Vec3 unit_normal(const TrianglePoints& T) {
  return (T[1] - T[0]).cross(T[2] - T[0]).normalized();
}

// Projection onto `axis` of the set where triangle T meets the other plane.
void plane_crossing_interval(const TrianglePoints& T, const std::array<double, 3>& d,
                             const std::array<int, 3>& s, const Vec3& axis, double& lo,
                             double& hi) {
  lo = std::numeric_limits<double>::infinity();
  hi = -lo;
  for (int i = 0; i < 3; ++i) {
    if (s[i] == 0) {
      const double x = axis.dot(T[i]);
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    const int j = (i + 1) % 3;
    if (s[i] * s[j] < 0) {
      const Vec3 p = T[i] + (d[i] / (d[i] - d[j])) * (T[j] - T[i]);
      const double x = axis.dot(p);
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
}

// Positive-area overlap of two coplanar triangles by separating axes in the
// projection plane that drops the dominant normal component.
bool coplanar_overlap(const TrianglePoints& P, const TrianglePoints& Q, const Vec3& n) {
  int drop = 0;
  n.cwiseAbs().maxCoeff(&drop);
  const int u = (drop + 1) % 3, v = (drop + 2) % 3;
  std::array<Eigen::Vector2d, 3> p2, q2;
  for (int i = 0; i < 3; ++i) {
    p2[i] = {P[i][u], P[i][v]};
    q2[i] = {Q[i][u], Q[i][v]};
  }
  auto separated_along_edges = [&](const std::array<Eigen::Vector2d, 3>& T) {
    for (int i = 0; i < 3; ++i) {
      const Eigen::Vector2d e = T[(i + 1) % 3] - T[i];
      Eigen::Vector2d axis(-e.y(), e.x());
      const double len = axis.norm();
      if (len <= 0.0) continue;
      axis /= len;
      double plo = 1e300, phi = -1e300, qlo = 1e300, qhi = -1e300;
      for (int k = 0; k < 3; ++k) {
        const double a = axis.dot(p2[k]), b = axis.dot(q2[k]);
        plo = std::min(plo, a);
        phi = std::max(phi, a);
        qlo = std::min(qlo, b);
        qhi = std::max(qhi, b);
      }
      if (std::min(phi, qhi) - std::max(plo, qlo) <= kTouchTolerance) return true;
    }
    return false;
  };
  return !separated_along_edges(p2) && !separated_along_edges(q2);
}

bool coplanar_case(const TrianglePoints& P, const TrianglePoints& Q, CoplanarRule rule) {
  if (rule == CoplanarRule::touching) return false;
  const Vec3 np = unit_normal(P), nq = unit_normal(Q);
  if (np.dot(nq) <= 0.0) return false;
  return coplanar_overlap(P, Q, nq);
}

}  // namespace

bool triangles_intersect(const TrianglePoints& P, const TrianglePoints& Q, CoplanarRule rule) {
  const Vec3 nq = unit_normal(Q);
  std::array<double, 3> dp;
  std::array<int, 3> sp;
  int pos = 0, neg = 0;
  for (int i = 0; i < 3; ++i) {
    dp[i] = nq.dot(P[i] - Q[0]);
    sp[i] = side_of(dp[i]);
    pos += sp[i] > 0;
    neg += sp[i] < 0;
  }
  if (pos == 0 && neg == 0) return coplanar_case(P, Q, rule);
  if (pos == 0 || neg == 0) return false;

  const Vec3 np = unit_normal(P);
  std::array<double, 3> dq;
  std::array<int, 3> sq;
  pos = neg = 0;
  for (int i = 0; i < 3; ++i) {
    dq[i] = np.dot(Q[i] - P[0]);
    sq[i] = side_of(dq[i]);
    pos += sq[i] > 0;
    neg += sq[i] < 0;
  }
  if (pos == 0 && neg == 0) return coplanar_case(P, Q, rule);
  if (pos == 0 || neg == 0) return false;

  Vec3 axis = np.cross(nq);
  const double len = axis.norm();
  if (len < 1e-14) return coplanar_case(P, Q, rule);
  axis /= len;

  double plo, phi, qlo, qhi;
  plane_crossing_interval(P, dp, sp, axis, plo, phi);
  plane_crossing_interval(Q, dq, sq, axis, qlo, qhi);
  return std::min(phi, qhi) - std::max(plo, qlo) > kTouchTolerance;
}

TriangleDistance triangle_distance(const TrianglePoints& P, const TrianglePoints& Q) {
  TriangleDistance best;
  double best_sq = std::numeric_limits<double>::infinity();

  for (int i = 0; i < 3; ++i) {
    const auto c = closest_point_on_triangle(P[i], Q[0], Q[1], Q[2]);
    const double d = (c.point - P[i]).squaredNorm();
    if (d < best_sq) {
      best_sq = d;
      best.point_p = P[i];
      best.point_q = c.point;
      best.bary_p = Vec3::Unit(i);
      best.bary_q = c.bary;
    }
  }
  for (int i = 0; i < 3; ++i) {
    const auto c = closest_point_on_triangle(Q[i], P[0], P[1], P[2]);
    const double d = (c.point - Q[i]).squaredNorm();
    if (d < best_sq) {
      best_sq = d;
      best.point_p = c.point;
      best.point_q = Q[i];
      best.bary_p = c.bary;
      best.bary_q = Vec3::Unit(i);
    }
  }
  for (int i = 0; i < 3; ++i) {
    const int i1 = (i + 1) % 3;
    for (int j = 0; j < 3; ++j) {
      const int j1 = (j + 1) % 3;
      const auto c = closest_points_on_segments(P[i], P[i1], Q[j], Q[j1]);
      const double d = (c.p - c.q).squaredNorm();
      if (d < best_sq) {
        best_sq = d;
        best.point_p = c.p;
        best.point_q = c.q;
        best.bary_p = Vec3::Zero();
        best.bary_p[i] = 1.0 - c.s;
        best.bary_p[i1] = c.s;
        best.bary_q = Vec3::Zero();
        best.bary_q[j] = 1.0 - c.t;
        best.bary_q[j1] = c.t;
      }
    }
  }
  best.distance = std::sqrt(best_sq);
  return best;
}

}  // namespace propd
