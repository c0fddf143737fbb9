#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <limits>

namespace propd {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using TrianglePoints = std::array<Vec3, 3>;

/// Absolute tolerance under which two surfaces are considered touching.
inline constexpr double kTouchTolerance = 1e-12;

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void extend(const Aabb& b) {
    lo = lo.cwiseMin(b.lo);
    hi = hi.cwiseMax(b.hi);
  }
  bool empty() const { return (lo.array() > hi.array()).any(); }
  Vec3 center() const { return 0.5 * (lo + hi); }
  Vec3 extent() const { return hi - lo; }
  double diagonal() const { return empty() ? 0.0 : extent().norm(); }
  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  bool overlaps(const Aabb& o, double margin = 0.0) const {
    return (lo.array() <= o.hi.array() + margin).all() &&
           (o.lo.array() <= hi.array() + margin).all();
  }
  /// Euclidean distance between the boxes (0 when they overlap).
  double distance(const Aabb& o) const {
    const Vec3 gap = (o.lo - hi).cwiseMax(lo - o.hi).cwiseMax(Vec3::Zero());
    return gap.norm();
  }

  /// Axis-aligned bound of this box after the rigid map p -> R p + t.
  Aabb transformed(const Mat3& R, const Vec3& t) const {
    const Vec3 c = R * center() + t;
    const Vec3 h = R.cwiseAbs() * (0.5 * extent());
    return Aabb{c - h, c + h};
  }
};

struct ClosestOnTriangle {
  Vec3 point;
  Vec3 bary;  // weights of the three corners
};

/// Closest point of triangle (a, b, c) to p, with barycentric coordinates.
ClosestOnTriangle closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                            const Vec3& c);

struct ClosestOnSegments {
  double s = 0.0;  // parameter on the first segment
  double t = 0.0;  // parameter on the second segment
  Vec3 p;
  Vec3 q;
};

ClosestOnSegments closest_points_on_segments(const Vec3& p0, const Vec3& p1, const Vec3& q0,
                                             const Vec3& q1);

/// How coplanar overlapping triangles are classified.
enum class CoplanarRule {
  /// Both triangles bound closed, outward-oriented solids: coplanar faces with
  /// the same facing and a positive-area overlap mean the solids interpenetrate;
  /// opposite facing is a face-to-face touch.
  solid,
  /// At least one surface is open; coplanar contact is always a touch.
  touching,
};

/// True when the triangles cross each other. Contacts within kTouchTolerance
/// (shared points, edges lying on the other's plane, flush faces) count as
/// touching, not intersecting.
bool triangles_intersect(const TrianglePoints& P, const TrianglePoints& Q,
                         CoplanarRule rule = CoplanarRule::solid);

struct TriangleDistance {
  double distance = std::numeric_limits<double>::infinity();
  Vec3 point_p;
  Vec3 point_q;
  Vec3 bary_p;
  Vec3 bary_q;
};

/// Closest pair between two non-intersecting triangles.
TriangleDistance triangle_distance(const TrianglePoints& P, const TrianglePoints& Q);

}  // namespace propd
