#include "propd/oracle.hpp"

#include "propd/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numbers>
#include <thread>

namespace propd {

std::vector<Vec3> fibonacci_directions(std::size_t n, bool with_axes) {
  std::vector<Vec3> dirs;
  dirs.reserve(n + 6);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n);
    const double rad = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(i);
    dirs.emplace_back(rad * std::cos(phi), rad * std::sin(phi), z);
  }
  if (with_axes) {
    for (int k = 0; k < 3; ++k) {
      dirs.push_back(Vec3::Unit(k));
      dirs.push_back(-Vec3::Unit(k));
    }
  }
  return dirs;
}

namespace {

// Separation distance along u, or +inf if it cannot beat `bound`.
double separate_along(const TriMesh& A, const Configuration& q0, const TriMesh& B, const Vec3& u,
                      double step, double tol, double cap, double bound) {
  auto moved = [&](double s) {
    Configuration q = q0;
    q.translation += s * u;
    return q;
  };
  double lo = 0.0, hi = -1.0;
  for (double s = step;; s += step) {
    if (s - step >= bound) return std::numeric_limits<double>::infinity();
    if (s > cap) s = cap;
    if (!is_collision(A, moved(s), B)) {
      hi = s;
      break;
    }
    lo = s;
    if (s >= cap) throw Error("no collision-free translation within the march cap");
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (is_collision(A, moved(mid), B)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

}  // namespace

OracleResult translational_pd_oracle(const TriMesh& A, const Configuration& q0, const TriMesh& B,
                                     const std::vector<Vec3>& directions,
                                     const TranslationalOracleOptions& opt) {
  if (!is_collision(A, q0, B)) throw PreconditionError("oracle query configuration is collision-free");
  if (directions.empty()) throw PreconditionError("empty direction set");
  const double step = opt.march_step > 0.0 ? opt.march_step
                                            : std::min(A.diagonal(), B.diagonal()) / 200.0;
  const double tol = std::min(opt.tol, step);
  const double cap = A.diagonal() + B.diagonal() + (q0.translation - B.bounds().center()).norm();

  std::vector<double> value(directions.size(), std::numeric_limits<double>::infinity());
  std::atomic<std::size_t> next{0};
  std::mutex mutex;
  double bound = std::numeric_limits<double>::infinity();
  auto work = [&] {
    for (std::size_t i = next++; i < directions.size(); i = next++) {
      double b;
      {
        std::lock_guard lock(mutex);
        b = bound;
      }
      const double v = separate_along(A, q0, B, directions[i].normalized(), step, tol, cap, b);
      value[i] = v;
      std::lock_guard lock(mutex);
      bound = std::min(bound, v);
    }
  };
  if (opt.threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < opt.threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  // Lowest index among the minima, so the winner does not depend on scheduling.
  const auto best = static_cast<std::size_t>(
      std::min_element(value.begin(), value.end()) - value.begin());
  OracleResult res;
  res.value = value[best];
  res.direction = directions[best].normalized();
  res.witness = q0;
  res.witness.translation += res.value * res.direction;
  res.resolution = directions.size();
  res.bound_kind = BoundKind::upper_bound;
  res.angular_spacing = std::sqrt(4.0 * std::numbers::pi / static_cast<double>(directions.size()));
  return res;
}

OracleResult translational_pd_oracle(const TriMesh& A, const Configuration& q0, const TriMesh& B,
                                     std::size_t ndirs, const TranslationalOracleOptions& opt) {
  return translational_pd_oracle(A, q0, B, fibonacci_directions(ndirs), opt);
}

OracleResult generalized_pd_oracle(const TriMesh& A, const Configuration& q0, const TriMesh& B,
                                   std::size_t nsamples, Rng& rng, const MassProperties& props) {
  if (nsamples == 0) throw PreconditionError("generalized oracle needs at least one sample");
  if (!is_collision(A, q0, B)) throw PreconditionError("oracle query configuration is collision-free");
  const Tolerances tol = Tolerances::for_mesh(B);
  const double sigma = rotation_scale(props);
  const Embedding e0 = embed(q0, sigma);
  const double r_min = tol.contact;
  const double r_max = A.diagonal() + B.diagonal();
  constexpr int kLevels = 24;

  OracleResult res;
  res.value = std::numeric_limits<double>::infinity();
  res.resolution = nsamples;
  res.bound_kind = BoundKind::upper_bound;
  Embedding best_dir = Embedding::Zero();
  double best_radius = 0.0;
  // Grows the radius along dir until the pose is free, then lands on the
  // first contact towards q0.
  auto try_pose = [&](const Embedding& dir, double radius) {
    Configuration qf = unembed(e0 + radius * dir, sigma, q0.mode);
    while (is_collision(A, qf, B)) {
      radius *= 1.25;
      if (radius > r_max) return;
      qf = unembed(e0 + radius * dir, sigma, q0.mode);
    }
    const auto ccd = ccd_first_contact(A, qf, q0, B, tol);
    const double d = dist(q0, ccd.q_contact, MetricKind::object_norm, &props);
    if (d < res.value) {
      res.value = d;
      res.witness = ccd.q_contact;
      const Embedding step = embed(ccd.q_contact, sigma) - e0;
      best_radius = step.norm();
      if (best_radius > 0.0) best_dir = step / best_radius;
    }
  };
  auto random_dir = [&]() {
    Embedding u;
    for (int k = 0; k < 6; ++k) u[k] = rng.normal();
    if (q0.mode == Mode::translational) u.tail<3>().setZero();
    return u;
  };

  // First half: directions uniform on the sphere at geometric radii. Second
  // half: directions scattered around the best escape so far, with a spread
  // shrinking from 0.5 to 0.005, starting just inside its radius.
  const std::size_t global = (nsamples + 1) / 2;
  for (std::size_t i = 0; i < nsamples; ++i) {
    if (i < global || best_radius == 0.0) {
      const double level = static_cast<double>(i % kLevels) / (kLevels - 1);
      const Embedding u = random_dir();
      if (u.norm() == 0.0) continue;
      try_pose(u.normalized(), r_min * std::pow(r_max / r_min, level));
      continue;
    }
    const double progress = static_cast<double>(i - global) / static_cast<double>(nsamples - global);
    const double spread = 0.5 * std::pow(0.01, progress);
    const Embedding u = best_dir + spread * random_dir();
    if (u.norm() == 0.0) continue;
    try_pose(u.normalized(), best_radius * rng.uniform(1.0 - spread, 1.0));
  }
  if (!std::isfinite(res.value)) throw Error("no free configuration found around the query");
  return res;
}

}  // namespace propd
