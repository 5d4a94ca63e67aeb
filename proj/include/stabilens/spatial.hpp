#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "stabilens/error.hpp"

namespace stabilens {

/// Integer cell coordinates packed into 63 bits (21 bits per axis, biased).
struct CellKey {
  static constexpr std::int64_t kBias = 1 << 20;

  static std::int64_t coord(double v, double cell) { return static_cast<std::int64_t>(std::floor(v / cell)); }

  static std::uint64_t pack(std::int64_t x, std::int64_t y, std::int64_t z) {
    if (x < -kBias || x >= kBias || y < -kBias || y >= kBias || z < -kBias || z >= kBias)
      throw InvalidInput("spatial grid: coordinates exceed the addressable range for this cell size");
    return (static_cast<std::uint64_t>(x + kBias) << 42) | (static_cast<std::uint64_t>(y + kBias) << 21) |
           static_cast<std::uint64_t>(z + kBias);
  }

  static std::uint64_t of(const Eigen::Vector3d& p, double cell) {
    return pack(coord(p.x(), cell), coord(p.y(), cell), coord(p.z(), cell));
  }
};

/// Uniform hash grid over point indices. Used for fixed-radius queries where the
/// cell size equals the query radius.
class HashGrid {
 public:
  explicit HashGrid(double cell) : cell_(cell) {
    if (!(cell > 0)) throw InvalidInput("HashGrid: cell size must be positive");
  }

  void reserve(std::size_t cells) { cells_.reserve(cells); }

  void insert(std::uint32_t index, const Eigen::Vector3d& p) { cells_[CellKey::of(p, cell_)].push_back(index); }

  /// Calls visit(index) for every stored index whose cell overlaps the ball of
  /// the given radius around p. Callers apply the exact distance test.
  template <typename Visit>
  void for_each_candidate(const Eigen::Vector3d& p, double radius, Visit&& visit) const {
    const std::int64_t reach = static_cast<std::int64_t>(std::ceil(radius / cell_));
    const std::int64_t cx = CellKey::coord(p.x(), cell_), cy = CellKey::coord(p.y(), cell_),
                       cz = CellKey::coord(p.z(), cell_);
    for (std::int64_t dx = -reach; dx <= reach; ++dx)
      for (std::int64_t dy = -reach; dy <= reach; ++dy)
        for (std::int64_t dz = -reach; dz <= reach; ++dz) {
          const auto it = cells_.find(CellKey::pack(cx + dx, cy + dy, cz + dz));
          if (it == cells_.end()) continue;
          for (std::uint32_t idx : it->second) visit(idx);
        }
  }

  double cell() const noexcept { return cell_; }

 private:
  double cell_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cells_;
};

/// Static 3-d tree over a borrowed point array for k-nearest-neighbour queries.
class KdTree {
 public:
  struct Neighbor {
    double dist2;
    std::uint32_t index;
    friend bool operator<(const Neighbor& a, const Neighbor& b) {
      return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
    }
  };

  explicit KdTree(std::span<const Eigen::Vector3d> points) : points_(points) {
    order_.resize(points.size());
    for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
    if (!points.empty()) {
      nodes_.reserve(2 * points.size() / kLeafSize + 1);
      build(0, static_cast<std::uint32_t>(order_.size()));
    }
  }

  std::size_t size() const noexcept { return points_.size(); }

  /// The k nearest points to q, sorted by distance. `exclude` (a stored index)
  /// is skipped, which makes self-queries return k other points.
  std::vector<Neighbor> knn(const Eigen::Vector3d& q, std::size_t k,
                            std::uint32_t exclude = std::numeric_limits<std::uint32_t>::max()) const {
    std::vector<Neighbor> heap;
    if (k == 0 || nodes_.empty()) return heap;
    heap.reserve(k + 1);
    search(0, q, k, exclude, heap);
    std::sort_heap(heap.begin(), heap.end());
    return heap;
  }

  /// All stored indices within radius (inclusive) of q.
  void radius(const Eigen::Vector3d& q, double r, std::vector<std::uint32_t>& out) const {
    out.clear();
    if (!nodes_.empty()) radius_search(0, q, r * r, out);
  }

 private:
  static constexpr std::uint32_t kLeafSize = 12;

  struct Node {
    std::uint32_t begin, end;
    std::uint32_t left = 0, right = 0;  // 0 = leaf
    int axis = -1;
    double split = 0;
    Eigen::Vector3d lo, hi;  // bounding box
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    Node node;
    node.begin = begin;
    node.end = end;
    nodes_.push_back(node);
    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = -lo;
    for (std::uint32_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    nodes_[id].lo = lo;
    nodes_[id].hi = hi;
    if (end - begin <= kLeafSize) return id;
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] == lo[axis]) return id;  // all coincident
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
    nodes_[id].axis = axis;
    nodes_[id].split = points_[order_[mid]][axis];
    const std::uint32_t left = build(begin, mid);
    const std::uint32_t right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  static double box_dist2(const Node& n, const Eigen::Vector3d& q) {
    const Eigen::Vector3d d = (n.lo - q).cwiseMax(q - n.hi).cwiseMax(0.0);
    return d.squaredNorm();
  }

  void search(std::uint32_t id, const Eigen::Vector3d& q, std::size_t k, std::uint32_t exclude,
              std::vector<Neighbor>& heap) const {
    const Node& n = nodes_[id];
    if (heap.size() == k && box_dist2(n, q) > heap.front().dist2) return;
    if (n.left == 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const std::uint32_t idx = order_[i];
        if (idx == exclude) continue;
        const Neighbor cand{(points_[idx] - q).squaredNorm(), idx};
        if (heap.size() < k) {
          heap.push_back(cand);
          std::push_heap(heap.begin(), heap.end());
        } else if (cand < heap.front()) {
          std::pop_heap(heap.begin(), heap.end());
          heap.back() = cand;
          std::push_heap(heap.begin(), heap.end());
        }
      }
      return;
    }
    const bool go_left = q[n.axis] < n.split;
    search(go_left ? n.left : n.right, q, k, exclude, heap);
    search(go_left ? n.right : n.left, q, k, exclude, heap);
  }

  void radius_search(std::uint32_t id, const Eigen::Vector3d& q, double r2, std::vector<std::uint32_t>& out) const {
    const Node& n = nodes_[id];
    if (box_dist2(n, q) > r2) return;
    if (n.left == 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i)
        if ((points_[order_[i]] - q).squaredNorm() <= r2) out.push_back(order_[i]);
      return;
    }
    radius_search(n.left, q, r2, out);
    radius_search(n.right, q, r2, out);
  }

  std::span<const Eigen::Vector3d> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace stabilens
