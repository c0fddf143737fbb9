#pragma once

#include "propd/geometry.hpp"
#include "propd/mesh.hpp"

#include <Eigen/Geometry>

#include <array>
#include <string>

namespace propd {

using Quat = Eigen::Quaterniond;
using Embedding = Eigen::Matrix<double, 6, 1>;

enum class Mode { translational, generalized };
enum class MetricKind { euclidean_translation, object_norm };

std::string to_string(Mode mode);
std::string to_string(MetricKind metric);
Mode parse_mode(const std::string& s);
MetricKind parse_metric(const std::string& s);

/// Pose of the movable body A relative to the fixed body B. The quaternion is
/// kept unit length with a non-negative scalar part.
struct Configuration {
  Vec3 translation = Vec3::Zero();
  Quat rotation = Quat::Identity();
  Mode mode = Mode::translational;

  static Configuration translation_only(const Vec3& t) { return {t, Quat::Identity(), Mode::translational}; }
  /// Normalizes and canonicalizes `r`. Throws PreconditionError for a
  /// non-identity rotation in translational mode or a zero quaternion.
  static Configuration make(const Vec3& t, const Quat& r, Mode mode);

  Mat3 rotation_matrix() const { return rotation.toRotationMatrix(); }

  /// (tx, ty, tz, qw, qx, qy, qz)
  std::array<double, 7> to_array() const;
  static Configuration from_array(const std::array<double, 7>& a, Mode mode);
};

/// Unit quaternion with non-negative scalar part representing the same rotation.
Quat canonical(const Quat& q);

/// R(q) p + t(q)
inline Vec3 apply(const Configuration& q, const Vec3& p) { return q.rotation * p + q.translation; }

/// Distance between configurations. The object norm needs the mass
/// properties of A; passing nullptr with object_norm throws PreconditionError,
/// as does a mode mismatch.
double dist(const Configuration& a, const Configuration& b, MetricKind metric,
            const MassProperties* props);

/// Linear interpolation of translations, shortest-arc interpolation of
/// rotations. Exact at s = 0 and s = 1. When the rotations are antipodal the
/// arc turns positively about q0's body x axis (y, then z, if x is orthogonal
/// to the rotation axis).
Configuration interpolate(const Configuration& q0, const Configuration& q1, double s);

/// Slide motion that keeps the body-frame point `anchor` on a straight world
/// path while the rotation follows the shortest arc:
///   R(s) = slerp(R0, R1, s),  R(s) anchor + t(s) = lerp(w0, w1, s).
Configuration slide_interpolate(const Configuration& q0, const Configuration& q1,
                                const Vec3& anchor, double s);

/// Rotation angle of q in [0, pi].
double rotation_angle(const Quat& q);
/// Logarithm map: axis times angle, angle in [0, pi].
Vec3 rotation_vector(const Quat& q);
Quat rotation_from_vector(const Vec3& v);

/// sqrt(trace(second_moment) / volume), the length scale that converts a
/// rotation vector into embedding units.
double rotation_scale(const MassProperties& props);

Embedding embed(const Configuration& q, double sigma);
inline Embedding embed(const Configuration& q, const MassProperties& props) {
  return embed(q, rotation_scale(props));
}
Configuration unembed(const Embedding& e, double sigma, Mode mode);

/// Linear map under which Euclidean distance equals the object norm exactly:
/// with X = [R | t] and L L^T = [[M/V, c], [c^T, 1]], the object norm between
/// two configurations is the Frobenius norm of (X_a - X_b) L.
using ObjectNormPoint = Eigen::Matrix<double, 12, 1>;
using Mat4 = Eigen::Matrix4d;
Mat4 object_norm_factor(const MassProperties& props);
ObjectNormPoint object_norm_point(const Configuration& q, const Mat4& factor);

}  // namespace propd
