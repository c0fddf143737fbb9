#include "propd/transforms.hpp"

#include "propd/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace propd {

std::string to_string(Mode mode) { return mode == Mode::translational ? "trans" : "gen"; }

std::string to_string(MetricKind metric) {
  return metric == MetricKind::euclidean_translation ? "euclidean" : "object_norm";
}

Mode parse_mode(const std::string& s) {
  if (s == "trans" || s == "translational") return Mode::translational;
  if (s == "gen" || s == "generalized") return Mode::generalized;
  throw ParseError("unknown mode '" + s + "'");
}

MetricKind parse_metric(const std::string& s) {
  if (s == "euclidean" || s == "euclidean_translation") return MetricKind::euclidean_translation;
  if (s == "object_norm" || s == "object") return MetricKind::object_norm;
  throw ParseError("unknown metric '" + s + "'");
}

Quat canonical(const Quat& q) {
  Quat r = q.normalized();
  if (r.w() < 0.0) r.coeffs() = -r.coeffs();
  return r;
}

Configuration Configuration::make(const Vec3& t, const Quat& r, Mode mode) {
  if (!(r.norm() > 0.0)) throw PreconditionError("zero quaternion");
  Configuration q{t, canonical(r), mode};
  if (mode == Mode::translational && rotation_angle(q.rotation) > 1e-9) {
    throw PreconditionError("translational configuration with non-identity rotation");
  }
  if (mode == Mode::translational) q.rotation = Quat::Identity();
  return q;
}

std::array<double, 7> Configuration::to_array() const {
  return {translation.x(), translation.y(), translation.z(),
          rotation.w(),    rotation.x(),    rotation.y(), rotation.z()};
}

Configuration Configuration::from_array(const std::array<double, 7>& a, Mode mode) {
  auto q = make({a[0], a[1], a[2]}, Quat(a[3], a[4], a[5], a[6]), mode);
  // Stored values that are already canonical are kept bit for bit.
  const Quat stored(a[3], a[4], a[5], a[6]);
  if (mode == Mode::generalized && stored.w() >= 0.0 && std::abs(stored.norm() - 1.0) < 1e-14) {
    q.rotation = stored;
  }
  return q;
}

double dist(const Configuration& a, const Configuration& b, MetricKind metric,
            const MassProperties* props) {
  if (a.mode != b.mode) throw PreconditionError("configurations of different modes");
  const Vec3 dt = a.translation - b.translation;
  if (metric == MetricKind::euclidean_translation) return dt.norm();
  if (props == nullptr) throw PreconditionError("object norm needs mass properties");
  const Mat3 dR = a.rotation_matrix() - b.rotation_matrix();
  if (dR.isZero(0.0)) return dt.norm();
  const double r2 = (dR * props->second_moment * dR.transpose()).trace() / props->volume +
                    2.0 * dt.dot(dR * props->centroid) + dt.squaredNorm();
  return std::sqrt(std::max(r2, 0.0));
}

double rotation_angle(const Quat& q) {
  const Quat c = canonical(q);
  return 2.0 * std::atan2(c.vec().norm(), c.w());
}

Vec3 rotation_vector(const Quat& q) {
  const Quat c = canonical(q);
  const double s = c.vec().norm();
  if (s < 1e-12) return 2.0 * c.vec() / c.w();
  return (2.0 * std::atan2(s, c.w()) / s) * c.vec();
}

Quat rotation_from_vector(const Vec3& v) {
  const double angle = v.norm();
  if (angle < 1e-12) return Quat(1.0, 0.5 * v.x(), 0.5 * v.y(), 0.5 * v.z()).normalized();
  const Vec3 axis = v / angle;
  const double s = std::sin(0.5 * angle);
  return Quat(std::cos(0.5 * angle), s * axis.x(), s * axis.y(), s * axis.z());
}

namespace {

// Relative rotation q0^-1 q1 with the representative of the shorter arc.
Quat shortest_relative(const Quat& q0, const Quat& q1) {
  Quat rel = (q0.conjugate() * q1).normalized();
  if (rel.w() < 0.0) rel.coeffs() = -rel.coeffs();
  if (rel.w() == 0.0) {
    const Vec3& v = rel.vec();
    for (int k = 0; k < 3; ++k) {
      if (v[k] != 0.0) {
        if (v[k] < 0.0) rel.coeffs() = -rel.coeffs();
        break;
      }
    }
  }
  return rel;
}

Quat slerp(const Quat& q0, const Quat& q1, double s) {
  const Quat rel = shortest_relative(q0, q1);
  const double sn = rel.vec().norm();
  if (sn < 1e-15) return q0;
  const double half = std::atan2(sn, rel.w());
  const Vec3 axis = rel.vec() / sn;
  const double hs = s * half;
  const Quat step(std::cos(hs), std::sin(hs) * axis.x(), std::sin(hs) * axis.y(),
                  std::sin(hs) * axis.z());
  return canonical(q0 * step);
}

}  // namespace

Configuration interpolate(const Configuration& q0, const Configuration& q1, double s) {
  if (q0.mode != q1.mode) throw PreconditionError("configurations of different modes");
  if (s == 0.0) return q0;
  if (s == 1.0) return q1;
  Configuration q;
  q.mode = q0.mode;
  q.translation = (1.0 - s) * q0.translation + s * q1.translation;
  q.rotation = q0.mode == Mode::translational ? Quat::Identity() : slerp(q0.rotation, q1.rotation, s);
  return q;
}

Configuration slide_interpolate(const Configuration& q0, const Configuration& q1,
                                const Vec3& anchor, double s) {
  if (q0.mode != q1.mode) throw PreconditionError("configurations of different modes");
  if (s == 0.0) return q0;
  if (s == 1.0) return q1;
  Configuration q;
  q.mode = q0.mode;
  q.rotation = q0.mode == Mode::translational ? Quat::Identity() : slerp(q0.rotation, q1.rotation, s);
  const Vec3 w = (1.0 - s) * apply(q0, anchor) + s * apply(q1, anchor);
  q.translation = w - q.rotation * anchor;
  return q;
}

double rotation_scale(const MassProperties& props) {
  return std::sqrt(std::max(props.second_moment.trace(), 0.0) / props.volume);
}

Embedding embed(const Configuration& q, double sigma) {
  Embedding e;
  e.head<3>() = q.translation;
  if (q.mode == Mode::translational) {
    e.tail<3>().setZero();
  } else {
    e.tail<3>() = sigma * rotation_vector(q.rotation);
  }
  return e;
}

Configuration unembed(const Embedding& e, double sigma, Mode mode) {
  Configuration q;
  q.mode = mode;
  q.translation = e.head<3>();
  if (mode == Mode::generalized && sigma > 0.0) {
    q.rotation = canonical(rotation_from_vector(e.tail<3>() / sigma));
  }
  return q;
}

Mat4 object_norm_factor(const MassProperties& props) {
  Mat4 G = Mat4::Zero();
  G.topLeftCorner<3, 3>() = props.second_moment / props.volume;
  G.topRightCorner<3, 1>() = props.centroid;
  G.bottomLeftCorner<1, 3>() = props.centroid.transpose();
  G(3, 3) = 1.0;
  // Symmetric square root; tolerates the rank-deficient moments of flat bodies.
  const Eigen::SelfAdjointEigenSolver<Mat4> eig(G);
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

ObjectNormPoint object_norm_point(const Configuration& q, const Mat4& factor) {
  Eigen::Matrix<double, 3, 4> X;
  X.leftCols<3>() = q.rotation_matrix();
  X.col(3) = q.translation;
  const Eigen::Matrix<double, 3, 4> Y = X * factor;
  return Eigen::Map<const ObjectNormPoint>(Y.data());
}

}  // namespace propd
