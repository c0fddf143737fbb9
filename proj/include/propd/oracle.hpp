#pragma once

#include "propd/collision.hpp"
#include "propd/mesh.hpp"
#include "propd/random.hpp"
#include "propd/transforms.hpp"

#include <vector>

namespace propd {

enum class BoundKind { upper_bound, two_sided_estimate };

struct OracleResult {
  double value = 0.0;
  Vec3 direction = Vec3::Zero();  // translational oracle: best separating direction
  Configuration witness;          // certified collision-free
  std::size_t resolution = 0;     // directions or samples used
  BoundKind bound_kind = BoundKind::upper_bound;
  /// Translational oracle: angular spacing of the direction set (radians);
  /// the true PD is at least value * cos(spacing) for convex contact regions.
  double angular_spacing = 0.0;
};

/// n points of the Fibonacci sphere lattice, optionally followed by the six
/// signed coordinate axes.
std::vector<Vec3> fibonacci_directions(std::size_t n, bool with_axes = true);

struct TranslationalOracleOptions {
  double tol = 1e-4;
  /// Coarse march step before bisection; 0 picks min(diag A, diag B) / 200.
  double march_step = 0.0;
  int threads = 1;
};

/// Minimum over the directions of the smallest translation of A out of
/// collision: march along each direction until free, then bisect the last
/// bracket to tol. Free gaps thinner than the march step may be skipped, which
/// can only make the bound looser. Throws PreconditionError if q0 is free.
OracleResult translational_pd_oracle(const TriMesh& A, const Configuration& q0, const TriMesh& B,
                                     const std::vector<Vec3>& directions,
                                     const TranslationalOracleOptions& opt = {});

/// ndirs Fibonacci directions plus the six axes.
OracleResult translational_pd_oracle(const TriMesh& A, const Configuration& q0, const TriMesh& B,
                                     std::size_t ndirs, const TranslationalOracleOptions& opt = {});

/// Generalized PD upper bound: random free poses at geometrically spaced
/// embedding radii around q0, each connected to q0 by CCD; the closest contact
/// in the object norm wins. Throws PreconditionError for nsamples == 0 or a
/// free q0, Error if no sample produced a contact.
OracleResult generalized_pd_oracle(const TriMesh& A, const Configuration& q0, const TriMesh& B,
                                   std::size_t nsamples, Rng& rng, const MassProperties& props);

}  // namespace propd
