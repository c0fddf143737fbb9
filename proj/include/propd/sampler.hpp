#pragma once

#include "propd/collision.hpp"
#include "propd/mesh.hpp"
#include "propd/random.hpp"
#include "propd/sample_db.hpp"
#include "propd/transforms.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace propd {

/// Sampling box for seed translations. Rotations are drawn from the full
/// rotation group in generalized mode.
struct SeedBounds {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  /// Cube centred so that A's bounding box centre meets B's, with edge length
  /// equal to the sum of the two bounding-box diagonals.
  static SeedBounds around(const TriMesh& A, const TriMesh& B);
};

/// Orthonormal contact frame at a vertex of B: columns (tangent, normal x
/// tangent, normal). The tangent is the world z axis projected onto the
/// tangent plane, or the world x axis where the normal is within about 0.06
/// degrees of z. Throws GeometryError when the vertex normal is undefined.
Mat3 contact_frame(const TriMesh& B, int v);

/// n uniformly drawn in-collision configurations (rejection sampling with DCD).
std::vector<Configuration> random_in_collision(const TriMesh& A, const TriMesh& B, Mode mode,
                                               std::size_t n, Rng& rng, const SeedBounds& bounds);

struct SamplerContext {
  const TriMesh& A;
  const TriMesh& B;
  Mode mode = Mode::translational;
  Tolerances tol;
  StepPolicy step;
};

/// Relative-orientation record (theta or rel) for A at pose q touching B at
/// vertex v with anchor feature `anchor`.
void record_orientation(const SamplerContext& ctx, ContactSample& s);

/// Pose that puts the sample's anchor exactly on `target` while keeping the
/// relative orientation: R' = frame(target) * rel in generalized mode, R' = I in
/// translational mode; t' = p_B(target) - R' p_A.
Configuration slide_transition(const SamplerContext& ctx, const ContactSample& s, int target);

/// Translates A along -normal_B(v) until the gap is in (0, tol.contact]. Returns
/// std::nullopt if 32 bisection steps do not get there.
std::optional<Configuration> repair_contact(const SamplerContext& ctx, const Configuration& q,
                                            int v);

/// Translational re-anchoring for an in-collision slide whose only contact is
/// at the anchor: translates A along normal_B(v) to the first free pose with
/// gap <= tol.contact (march, then bisection) and anchors the result at the
/// closest feature pair. std::nullopt if the vertex normal is undefined or no
/// free pose is found within the diagonal of B.
std::optional<ContactSample> lift_to_contact(const SamplerContext& ctx, const Configuration& q,
                                             int v);

/// Contact certificate of a configuration: collision-free, surface gap at most
/// tol.contact, and a push of 2 tol.contact along minus B's normal at the
/// closest point brings A into collision.
struct Certificate {
  bool free = false;
  double gap = 0.0;
  bool push_collides = false;
  bool gap_ok = false;

  bool ok() const { return free && gap_ok && push_collides; }
};
Certificate certify_contact(const TriMesh& A, const Configuration& q, const TriMesh& B,
                            const Tolerances& tol);

struct CallTimer {
  std::size_t calls = 0;
  std::vector<double> micros;  // one entry per call
};

struct PropagationStats {
  std::size_t seeds = 0;
  std::size_t propagated = 0;
  std::size_t seed_attempts = 0;     // CCD seeds rejected by dedup included
  std::size_t seed_rejections = 0;
  std::size_t internal_cases = 0;
  std::size_t boundary_cases = 0;
  std::size_t critical_none = 0;     // internal cases with no new contact
  std::size_t lifted = 0;            // translational re-anchored samples accepted
  std::vector<std::size_t> per_seed; // samples produced by each seed's propagation, seed included
  CallTimer ccd;
  CallTimer dcd;
  double build_seconds = 0.0;
  bool saturated = false;

  std::map<std::size_t, std::size_t> per_seed_histogram() const;
  double t_ccd_over_t_dcd() const;
};

/// Median and median absolute deviation.
std::pair<double, double> median_mad(std::vector<double> values);

/// Draws uniform configurations until a free and an in-collision one are
/// found and returns the CCD contact between them. Retries (up to 64 CCD
/// calls) while the contact lies within r of a sample already in `db`;
/// std::nullopt means the contact space is saturated at radius r.
/// Throws PreconditionError if the box is smaller than the sum of the
/// bounding-box diagonals.
std::optional<ContactSample> random_contact_seed(const SamplerContext& ctx, Rng& rng,
                                                 const SeedBounds& bounds, const SampleDB& db,
                                                 PropagationStats* stats = nullptr);

/// Breadth-first slide propagation from a certified seed (which must already
/// be in `db`). New samples are dedup-tested against `db` and inserted as
/// they are discovered; stops early once db.size() reaches `budget`.
/// Returns the inserted samples.
std::vector<ContactSample> propagate(const SamplerContext& ctx, const ContactSample& seed,
                                     SampleDB& db, std::size_t budget,
                                     PropagationStats* stats = nullptr);

/// Default dedup radius as a fraction of the diagonal of B.
inline constexpr double kDefaultDedupFraction = 4e-3;

struct BuildParams {
  Mode mode = Mode::translational;
  MetricKind metric = MetricKind::euclidean_translation;
  std::size_t budget = 1000;
  std::size_t max_seeds = 0;  // 0 = unlimited
  StepPolicy step;
  double r = 0.0;  // 0 = kDefaultDedupFraction * diagonal of B
  std::uint64_t rng_seed = 1;
  int threads = 1;
  std::optional<SeedBounds> bounds;
};

struct BuildResult {
  SampleDB db;
  PropagationStats stats;
};

/// Seeds and propagates until the budget (total samples) or max_seeds is
/// reached or seeding saturates. Single-threaded builds are reproducible from
/// the rng seed; with threads > 1 workers propagate into private batches that a
/// merger dedup-tests into the shared database (not byte-reproducible).
BuildResult build_contact_db(const TriMesh& A, const TriMesh& B, const BuildParams& params);

}  // namespace propd
