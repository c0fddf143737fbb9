#include "propd/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace propd {

namespace {

bool closer(const KdNeighbor& a, const KdNeighbor& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
}

// Max-heap of the best k candidates (squared distances while searching).
void offer(std::vector<KdNeighbor>& heap, std::size_t k, double d2, int id) {
  const KdNeighbor n{d2, id};
  if (heap.size() < k) {
    heap.push_back(n);
    std::push_heap(heap.begin(), heap.end(), closer);
  } else if (closer(n, heap.front())) {
    std::pop_heap(heap.begin(), heap.end(), closer);
    heap.back() = n;
    std::push_heap(heap.begin(), heap.end(), closer);
  }
}

}  // namespace

template <int D>
void BasicKdTree<D>::Static::build(int lo, int hi) {
  if (hi - lo <= kLeaf) return;
  Point mn = points[lo], mx = points[lo];
  for (int i = lo + 1; i < hi; ++i) {
    mn = mn.cwiseMin(points[i]);
    mx = mx.cwiseMax(points[i]);
  }
  int dim = 0;
  (mx - mn).maxCoeff(&dim);
  const int mid = (lo + hi) / 2;
  std::vector<int> order(hi - lo);
  std::iota(order.begin(), order.end(), lo);
  std::nth_element(order.begin(), order.begin() + (mid - lo), order.end(), [&](int a, int b) {
    if (points[a][dim] != points[b][dim]) return points[a][dim] < points[b][dim];
    return ids[a] < ids[b];
  });
  std::vector<Point> p(hi - lo);
  std::vector<int> id(hi - lo);
  for (int i = 0; i < hi - lo; ++i) {
    p[i] = points[order[i]];
    id[i] = ids[order[i]];
  }
  std::copy(p.begin(), p.end(), points.begin() + lo);
  std::copy(id.begin(), id.end(), ids.begin() + lo);
  split[mid] = static_cast<signed char>(dim);
  build(lo, mid);
  build(mid + 1, hi);
}

template <int D>
bool BasicKdTree<D>::Static::any_within(const Point& q, double r2, int lo, int hi) const {
  if (hi - lo <= kLeaf) {
    for (int i = lo; i < hi; ++i) {
      if ((points[i] - q).squaredNorm() < r2) return true;
    }
    return false;
  }
  const int mid = (lo + hi) / 2;
  if ((points[mid] - q).squaredNorm() < r2) return true;
  const double diff = q[split[mid]] - points[mid][split[mid]];
  const bool left_first = diff < 0.0;
  if (left_first ? any_within(q, r2, lo, mid) : any_within(q, r2, mid + 1, hi)) return true;
  if (diff * diff < r2) {
    return left_first ? any_within(q, r2, mid + 1, hi) : any_within(q, r2, lo, mid);
  }
  return false;
}

template <int D>
void BasicKdTree<D>::Static::knn(const Point& q, std::size_t k, std::vector<Neighbor>& heap, int lo,
                                 int hi) const {
  if (hi - lo <= kLeaf) {
    for (int i = lo; i < hi; ++i) offer(heap, k, (points[i] - q).squaredNorm(), ids[i]);
    return;
  }
  const int mid = (lo + hi) / 2;
  offer(heap, k, (points[mid] - q).squaredNorm(), ids[mid]);
  const double diff = q[split[mid]] - points[mid][split[mid]];
  const bool left_first = diff < 0.0;
  if (left_first) {
    knn(q, k, heap, lo, mid);
  } else {
    knn(q, k, heap, mid + 1, hi);
  }
  if (heap.size() < k || diff * diff <= heap.front().distance) {
    if (left_first) {
      knn(q, k, heap, mid + 1, hi);
    } else {
      knn(q, k, heap, lo, mid);
    }
  }
}

template <int D>
void BasicKdTree<D>::insert(const Point& p, int id) {
  buffer_points_.push_back(p);
  buffer_ids_.push_back(id);
  ++count_;
  if (buffer_points_.size() < kBuffer) return;

  Static merged;
  merged.points = std::move(buffer_points_);
  merged.ids = std::move(buffer_ids_);
  buffer_points_.clear();
  buffer_ids_.clear();
  std::size_t level = 0;
  for (; level < levels_.size() && !levels_[level].empty(); ++level) {
    auto& l = levels_[level];
    merged.points.insert(merged.points.end(), l.points.begin(), l.points.end());
    merged.ids.insert(merged.ids.end(), l.ids.begin(), l.ids.end());
    l = Static{};
  }
  if (level == levels_.size()) levels_.emplace_back();
  merged.split.assign(merged.points.size(), -1);
  merged.build(0, static_cast<int>(merged.points.size()));
  levels_[level] = std::move(merged);
}

template <int D>
bool BasicKdTree<D>::any_within(const Point& q, double r) const {
  const double r2 = r * r;
  for (const auto& p : buffer_points_) {
    if ((p - q).squaredNorm() < r2) return true;
  }
  for (const auto& l : levels_) {
    if (!l.empty() && l.any_within(q, r2, 0, static_cast<int>(l.points.size()))) return true;
  }
  return false;
}

template <int D>
std::vector<KdNeighbor> BasicKdTree<D>::knn(const Point& q, std::size_t k) const {
  std::vector<Neighbor> heap;
  if (k == 0) return heap;
  heap.reserve(k + 1);
  for (std::size_t i = 0; i < buffer_points_.size(); ++i) {
    offer(heap, k, (buffer_points_[i] - q).squaredNorm(), buffer_ids_[i]);
  }
  for (const auto& l : levels_) {
    if (!l.empty()) l.knn(q, k, heap, 0, static_cast<int>(l.points.size()));
  }
  std::sort_heap(heap.begin(), heap.end(), closer);
  for (auto& n : heap) n.distance = std::sqrt(n.distance);
  return heap;
}

template class BasicKdTree<6>;
template class BasicKdTree<12>;

}  // namespace propd
