#pragma once

#include "propd/kdtree.hpp"
#include "propd/mesh.hpp"
#include "propd/transforms.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace propd {

enum class SampleKind { seed, propagated };

/// One certified contact configuration with the contact it was built from.
struct ContactSample {
  Configuration q;
  SurfacePoint anchor;  // p_A on A
  int vertex_b = -1;    // p_B on B
  /// Translational mode: angle between the normal of B at vertex_b and the
  /// world normal of A at the anchor.
  double theta = 0.0;
  /// Generalized mode: contact frame at vertex_b mapped to A's rotation,
  /// R = frame(vertex_b) * rel.
  Quat rel = Quat::Identity();
  SampleKind kind = SampleKind::seed;
};

/// How far a slide step moves along B.
struct StepPolicy {
  bool one_ring = true;
  double d = 0.0;  // used when !one_ring

  static StepPolicy parse(const std::string& s);  // "one-ring" or "fixed:<d>"
  std::string to_string() const;
};

struct DbMeta {
  std::uint64_t mesh_hash_a = 0;
  std::uint64_t mesh_hash_b = 0;
  Mode mode = Mode::translational;
  MetricKind metric = MetricKind::euclidean_translation;
  double r = 0.0;
  double sigma = 0.0;  // embedding rotation scale
  std::uint64_t rng_seed = 0;
  StepPolicy step;
  std::size_t seeds = 0;
  std::size_t propagated = 0;
};

/// Persisted approximate contact space with its embedding index.
class SampleDB {
 public:
  static constexpr int kFormatVersion = 1;

  SampleDB() = default;
  explicit SampleDB(DbMeta meta) : meta_(std::move(meta)) {}

  const DbMeta& meta() const { return meta_; }
  const std::vector<ContactSample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }

  Embedding embedding(const Configuration& q) const { return embed(q, meta_.sigma); }

  /// True iff a stored sample lies strictly within r of q in the embedding.
  bool dedup_test(const Configuration& q, double r) const;
  bool dedup_test(const Configuration& q) const { return dedup_test(q, meta_.r); }

  /// Appends without a dedup test; updates the seed/propagated counters.
  int insert(const ContactSample& s);

  std::vector<KdTree::Neighbor> nearest(const Configuration& q, std::size_t k) const {
    return index_.knn(embedding(q), k);
  }

  /// The first n samples as a database of their own (nested DBs).
  SampleDB prefix(std::size_t n) const;

  void write(const std::filesystem::path& path) const;
  void write(std::ostream& out) const;
  /// Throws DataMismatchError if the format version or mesh hashes differ
  /// from the given meshes, ParseError on malformed input.
  static SampleDB read(const std::filesystem::path& path, const TriMesh& A, const TriMesh& B);
  static SampleDB read(std::istream& in, const TriMesh& A, const TriMesh& B);

 private:
  DbMeta meta_;
  std::vector<ContactSample> samples_;
  KdTree index_;
};

std::string hash_to_hex(std::uint64_t h);

}  // namespace propd
