#ifndef MAPPRIOR_KDTREE_H_
#define MAPPRIOR_KDTREE_H_

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace mapprior {

struct Neighbor {
  double squared_distance = 0.0;
  std::uint32_t index = 0;

  bool operator<(const Neighbor& other) const {
    return squared_distance < other.squared_distance ||
           (squared_distance == other.squared_distance && index < other.index);
  }
};

// Static 3D kd-tree over a point set. Results are ordered by
// (squared distance, index), which makes tie handling independent of the
// tree layout.
class KdTree {
 public:
  explicit KdTree(std::span<const Eigen::Vector3d> points);

  std::size_t size() const { return points_.size(); }

  // The k nearest points to `query` in ascending order. Point `skip` (if
  // set) is never returned.
  std::vector<Neighbor> KNearest(
      const Eigen::Vector3d& query, std::size_t k,
      std::uint32_t skip = std::numeric_limits<std::uint32_t>::max()) const;

  // Nearest point with squared distance <= max_squared_distance, or a
  // Neighbor with index == kNoNeighbor.
  Neighbor Nearest(const Eigen::Vector3d& query,
                   double max_squared_distance =
                       std::numeric_limits<double>::infinity()) const;

  static constexpr std::uint32_t kNoNeighbor =
      std::numeric_limits<std::uint32_t>::max();

 private:
  struct Node {
    // Leaf when axis < 0: [begin, end) into order_.
    int axis = -1;
    double split = 0.0;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
  };

  std::uint32_t Build(std::uint32_t begin, std::uint32_t end);

  template <typename Visitor>
  void Search(std::uint32_t node, const Eigen::Vector3d& query,
              Visitor& visitor) const;

  std::vector<Eigen::Vector3d> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace mapprior

#endif  // MAPPRIOR_KDTREE_H_
