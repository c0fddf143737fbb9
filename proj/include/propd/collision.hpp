#pragma once

#include "propd/mesh.hpp"
#include "propd/transforms.hpp"

#include <optional>
#include <vector>

namespace propd {

/// Numerical tolerances, tied to the scale of the fixed body B.
struct Tolerances {
  double contact = 1e-4;  // surfaces closer than this are in contact
  double gap = 1e-4;      // largest gap a CCD contact may leave
  double time = 1e-6;     // CCD bracket width in the motion parameter

  /// contact = gap = 1e-4 * bounding-box diagonal of B, time = 1e-6.
  static Tolerances for_mesh(const TriMesh& B);
};

/// A pair of nearby surface points of A(q) and B.
struct ContactPair {
  SurfacePoint feature_a;
  SurfacePoint feature_b;
  Vec3 point_a = Vec3::Zero();   // A's body frame
  Vec3 point_b = Vec3::Zero();   // world (B's) frame
  Vec3 normal_a = Vec3::Zero();  // world frame, at the pose the pair was computed for
  Vec3 normal_b = Vec3::Zero();  // world frame; on an open B, faces A
  double gap = 0.0;
};

/// True iff some triangle of A(q) crosses some triangle of B. Touching within
/// kTouchTolerance is collision-free. Coplanar overlaps follow
/// CoplanarRule::solid when both meshes are closed, CoplanarRule::touching
/// otherwise. A body entirely inside the other is not detected.
bool is_collision(const TriMesh& A, const Configuration& q, const TriMesh& B);

struct DistanceResult {
  double distance = 0.0;
  ContactPair pair;
};

/// Minimum surface distance by BVH branch-and-bound. Throws PreconditionError
/// when A(q) and B intersect.
DistanceResult min_distance(const TriMesh& A, const Configuration& q, const TriMesh& B);

/// Vertex-face, face-vertex and edge-edge feature pairs with gap <= eps.
/// Pairs whose A points and B points both lie within 2 eps of a better pair
/// are merged into it. Sorted by gap.
std::vector<ContactPair> contact_pairs(const TriMesh& A, const Configuration& q, const TriMesh& B,
                                       double eps);

struct CcdResult {
  bool hit = false;
  double t_contact = 0.0;
  Configuration q_contact;
  ContactPair pair;
  int iterations = 0;
};

/// First contact along interpolate(q_free, q_hit, t) by conservative
/// advancement followed by bisection. Throws PreconditionError unless q_free is
/// free and q_hit is in collision.
CcdResult ccd_first_contact(const TriMesh& A, const Configuration& q_free,
                            const Configuration& q_hit, const TriMesh& B, const Tolerances& tol);

struct CriticalConfiguration {
  double s = 0.0;  // parameter along the slide trajectory
  Configuration q;
  std::vector<ContactPair> contacts;  // excludes pairs at the anchor
};

/// First pose along the slide from q to q_slide (anchored at `anchor` on A,
/// see slide_interpolate) where a feature of A away from the anchor comes
/// within tol.contact of B. std::nullopt when the slide never collides or the
/// only contacts at the onset of collision are at the anchor.
std::optional<CriticalConfiguration> critical_configuration(const TriMesh& A,
                                                            const Configuration& q,
                                                            const Configuration& q_slide,
                                                            const TriMesh& B,
                                                            const SurfacePoint& anchor,
                                                            const Tolerances& tol);

}  // namespace propd
