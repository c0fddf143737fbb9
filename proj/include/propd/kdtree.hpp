#pragma once

#include "propd/transforms.hpp"

#include <cstddef>
#include <utility>
#include <vector>

namespace propd {

struct KdNeighbor {
  double distance;
  int id;
};

/// Incremental D-dimensional kd-tree. Insertions go to a small scan buffer;
/// full buffers are merged into a logarithmic series of static, balanced
/// trees (binary-counter style), so inserts are amortized O(log^2 n) and the
/// structure never needs rebalancing.
template <int D>
class BasicKdTree {
 public:
  using Point = Eigen::Matrix<double, D, 1>;
  using Neighbor = KdNeighbor;

  void insert(const Point& p, int id);
  std::size_t size() const { return count_; }

  /// True iff some stored point lies strictly closer than r to q.
  bool any_within(const Point& q, double r) const;
  /// The k nearest points, closest first (ties by id).
  std::vector<Neighbor> knn(const Point& q, std::size_t k) const;

 private:
  static constexpr std::size_t kBuffer = 32;
  static constexpr int kLeaf = 8;

  struct Static {
    std::vector<Point> points;
    std::vector<int> ids;
    std::vector<signed char> split;  // split dimension stored at the median slot, -1 for leaves

    bool empty() const { return points.empty(); }
    void build(int lo, int hi);
    bool any_within(const Point& q, double r2, int lo, int hi) const;
    void knn(const Point& q, std::size_t k, std::vector<Neighbor>& heap, int lo, int hi) const;
  };

  std::vector<Point> buffer_points_;
  std::vector<int> buffer_ids_;
  std::vector<Static> levels_;
  std::size_t count_ = 0;
};

using KdTree = BasicKdTree<6>;
using ObjectNormKdTree = BasicKdTree<12>;

}  // namespace propd
