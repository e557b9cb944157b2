#include "mapprior/kdtree.h"

#include <algorithm>
#include <numeric>
#include <queue>

namespace mapprior {
namespace {

constexpr std::uint32_t kLeafSize = 12;

class KNearestVisitor {
 public:
  KNearestVisitor(std::size_t k, std::uint32_t skip) : k_(k), skip_(skip) {}

  double Bound() const {
    return heap_.size() < k_ ? std::numeric_limits<double>::infinity()
                             : heap_.top().squared_distance;
  }

  void Visit(std::uint32_t index, double squared_distance) {
    if (index == skip_) return;
    const Neighbor candidate{squared_distance, index};
    if (heap_.size() < k_) {
      heap_.push(candidate);
    } else if (candidate < heap_.top()) {
      heap_.pop();
      heap_.push(candidate);
    }
  }

  std::vector<Neighbor> Take() {
    std::vector<Neighbor> result(heap_.size());
    for (std::size_t i = result.size(); i-- > 0;) {
      result[i] = heap_.top();
      heap_.pop();
    }
    return result;
  }

 private:
  std::size_t k_;
  std::uint32_t skip_;
  std::priority_queue<Neighbor> heap_;
};

class NearestVisitor {
 public:
  explicit NearestVisitor(double max_squared_distance)
      : best_{max_squared_distance, KdTree::kNoNeighbor} {}

  double Bound() const { return best_.squared_distance; }

  void Visit(std::uint32_t index, double squared_distance) {
    const Neighbor candidate{squared_distance, index};
    if (squared_distance <= best_.squared_distance &&
        (best_.index == KdTree::kNoNeighbor || candidate < best_)) {
      best_ = candidate;
    }
  }

  Neighbor result() const {
    return best_.index == KdTree::kNoNeighbor
               ? Neighbor{std::numeric_limits<double>::infinity(),
                          KdTree::kNoNeighbor}
               : best_;
  }

 private:
  Neighbor best_;
};

}  // namespace

KdTree::KdTree(std::span<const Eigen::Vector3d> points)
    : points_(points.begin(), points.end()), order_(points.size()) {
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    Build(0, static_cast<std::uint32_t>(points_.size()));
  }
}

std::uint32_t KdTree::Build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  Node node;
  node.begin = begin;
  node.end = end;
  if (end - begin > kLeafSize) {
    Eigen::Vector3d lo = points_[order_[begin]];
    Eigen::Vector3d hi = lo;
    for (std::uint32_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] > lo[axis]) {
      const std::uint32_t mid = begin + (end - begin) / 2;
      std::nth_element(order_.begin() + begin, order_.begin() + mid,
                       order_.begin() + end,
                       [&](std::uint32_t a, std::uint32_t b) {
                         return points_[a][axis] < points_[b][axis];
                       });
      node.axis = axis;
      node.split = points_[order_[mid]][axis];
      node.left = Build(begin, mid);
      node.right = Build(mid, end);
    }
  }
  nodes_[id] = node;
  return id;
}

template <typename Visitor>
void KdTree::Search(std::uint32_t node_id, const Eigen::Vector3d& query,
                    Visitor& visitor) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::uint32_t index = order_[i];
      visitor.Visit(index, (points_[index] - query).squaredNorm());
    }
    return;
  }
  // Left holds coordinates <= split, right holds coordinates >= split.
  const double diff = query[node.axis] - node.split;
  const std::uint32_t near = diff < 0.0 ? node.left : node.right;
  const std::uint32_t far = diff < 0.0 ? node.right : node.left;
  Search(near, query, visitor);
  if (diff * diff <= visitor.Bound()) Search(far, query, visitor);
}

std::vector<Neighbor> KdTree::KNearest(const Eigen::Vector3d& query,
                                       std::size_t k,
                                       std::uint32_t skip) const {
  if (k == 0 || points_.empty()) return {};
  KNearestVisitor visitor(k, skip);
  Search(0, query, visitor);
  return visitor.Take();
}

Neighbor KdTree::Nearest(const Eigen::Vector3d& query,
                         double max_squared_distance) const {
  NearestVisitor visitor(max_squared_distance);
  if (!points_.empty()) Search(0, query, visitor);
  return visitor.result();
}

}  // namespace mapprior
