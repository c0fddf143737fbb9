#pragma once

#include "propd/collision.hpp"
#include "propd/kdtree.hpp"
#include "propd/mesh.hpp"
#include "propd/sample_db.hpp"
#include "propd/transforms.hpp"

#include <string>
#include <vector>

namespace propd {

enum class QueryStatus {
  ok,               // a same-triangle pair was found and projected
  fallback,         // no usable pair: nearest certified sample
  not_penetrating,  // q0 is collision-free
};

std::string to_string(QueryStatus s);

struct PDResult {
  double value = 0.0;
  Configuration witness;
  MetricKind metric = MetricKind::euclidean_translation;
  std::size_t candidates_examined = 0;
  bool refined = false;  // the projected candidate beat every raw neighbor
  QueryStatus status = QueryStatus::ok;
  /// Exact-metric distance to the closest raw neighbor (before refinement).
  double raw_nearest = 0.0;
};

/// Run-time PD queries against a database built for (A, B).
class PdQuery {
 public:
  static constexpr std::size_t kDefaultK = 16;
  static constexpr int kPairs = 3;      // projected pairs per query
  static constexpr int kMarchCap = 64;  // steps of tol.contact when repairing a projection

  /// Throws DataMismatchError if the database was built for other meshes.
  PdQuery(const TriMesh& A, const TriMesh& B, const SampleDB& db);

  /// PD estimate for an in-collision q0. The k candidates are the k nearest
  /// samples under the database metric. A free q0 gives status
  /// not_penetrating and value 0. Throws PreconditionError on an empty database
  /// or a mode mismatch.
  PDResult query(const Configuration& q0, std::size_t k = kDefaultK) const;

  struct Timed {
    PDResult result;
    double micros = 0.0;
    std::string error;  // non-empty when the query failed
  };
  /// Results in input order; failures are recorded per item.
  std::vector<Timed> batch(const std::vector<Configuration>& queries, std::size_t k = kDefaultK,
                           int threads = 1) const;

  const MassProperties& props() const { return props_; }
  MetricKind metric() const { return db_.meta().metric; }
  double distance(const Configuration& a, const Configuration& b) const {
    return dist(a, b, metric(), &props_);
  }

 private:
  const TriMesh& A_;
  const TriMesh& B_;
  const SampleDB& db_;
  MassProperties props_;
  Tolerances tol_;
  // Object-norm databases: candidates come from an isometric embedding of
  // the object norm, so the k nearest are exact.
  Mat4 factor_ = Mat4::Identity();
  ObjectNormKdTree exact_index_;
};

}  // namespace propd
