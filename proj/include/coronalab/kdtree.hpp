#pragma once
#include <numeric>
#include <queue>
#include <vector>

#include "core.hpp"

namespace coronalab {

// Static k-d tree over indexed points. Each node records the min/max original
// index in its subtree, so queries restricted to (or excluding) an index range
// [b, e) prune whole subtrees.
class KdTree {
 public:
  enum class Filter { Any, Inside, Outside };

  KdTree() = default;
  KdTree(const std::vector<Point>& pts, int dim) : pts_(pts), dim_(dim) {
    perm_.resize(pts_.size());
    std::iota(perm_.begin(), perm_.end(), 0);
    if (!pts_.empty()) build(0, static_cast<int>(pts_.size()));
  }

  std::size_t size() const { return pts_.size(); }
  const Point& point(int i) const { return pts_[i]; }

  struct Hit {
    int index = -1;
    double distance = kInf;
  };

  Hit nearest(const Point& q, Filter f = Filter::Any, int b = 0, int e = 0) const {
    return search([&](const Box& box) { return box.distance(q); }, [&](const Point& p) { return dist(p, q); }, f, b, e);
  }

  Hit nearest_to_box(const Box& target, Filter f = Filter::Any, int b = 0, int e = 0) const {
    return search([&](const Box& box) { return box.distance(target); }, [&](const Point& p) { return target.distance(p); },
                  f, b, e);
  }

  // Largest distance from q to a point with index in [b, e).
  double farthest_inside(const Point& q, int b, int e) const {
    double best = -1;
    if (nodes_.empty()) return best;
    std::vector<int> stack{0};
    while (!stack.empty()) {
      const Node& n = nodes_[stack.back()];
      stack.pop_back();
      if (n.max_idx < b || n.min_idx >= e) continue;
      if (n.box.max_distance(q) <= best) continue;
      if (n.left < 0) {
        for (int i = n.begin; i < n.end; ++i) {
          int id = perm_[i];
          if (id >= b && id < e) best = std::max(best, dist(pts_[id], q));
        }
        continue;
      }
      stack.push_back(n.left);
      stack.push_back(n.right);
    }
    return best;
  }

 private:
  struct Node {
    Box box;
    int begin, end;
    int left = -1, right = -1;
    int min_idx, max_idx;
  };

  int build(int begin, int end) {
    Node n;
    n.begin = begin;
    n.end = end;
    n.box = Box::empty(dim_);
    n.min_idx = static_cast<int>(pts_.size());
    n.max_idx = -1;
    for (int i = begin; i < end; ++i) {
      n.box.expand(pts_[perm_[i]]);
      n.min_idx = std::min(n.min_idx, perm_[i]);
      n.max_idx = std::max(n.max_idx, perm_[i]);
    }
    int id = static_cast<int>(nodes_.size());
    nodes_.push_back(n);
    if (end - begin > 8) {
      int axis = 0;
      for (int i = 1; i < dim_; ++i)
        if (n.box.side(i) > n.box.side(axis)) axis = i;
      int mid = (begin + end) / 2;
      std::nth_element(perm_.begin() + begin, perm_.begin() + mid, perm_.begin() + end,
                       [&](int a, int b) { return pts_[a][axis] < pts_[b][axis]; });
      int l = build(begin, mid);
      int r = build(mid, end);
      nodes_[id].left = l;
      nodes_[id].right = r;
    }
    return id;
  }

  static bool admissible(int id, Filter f, int b, int e) {
    if (f == Filter::Any) return true;
    bool in = id >= b && id < e;
    return f == Filter::Inside ? in : !in;
  }
  static bool node_may_match(const Node& n, Filter f, int b, int e) {
    if (f == Filter::Inside) return !(n.max_idx < b || n.min_idx >= e);
    if (f == Filter::Outside) return !(n.min_idx >= b && n.max_idx < e);
    return true;
  }

  template <class BoxLb, class PtDist>
  Hit search(BoxLb box_lb, PtDist pt_dist, Filter f, int b, int e) const {
    Hit hit;
    if (nodes_.empty()) return hit;
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
    pq.push({box_lb(nodes_[0].box), 0});
    while (!pq.empty()) {
      auto [lb, id] = pq.top();
      pq.pop();
      if (lb >= hit.distance) break;
      const Node& n = nodes_[id];
      if (!node_may_match(n, f, b, e)) continue;
      if (n.left < 0) {
        for (int i = n.begin; i < n.end; ++i) {
          int pid = perm_[i];
          if (!admissible(pid, f, b, e)) continue;
          double d = pt_dist(pts_[pid]);
          if (d < hit.distance || (d == hit.distance && pid < hit.index)) hit = {pid, d};
        }
        continue;
      }
      pq.push({box_lb(nodes_[n.left].box), n.left});
      pq.push({box_lb(nodes_[n.right].box), n.right});
    }
    return hit;
  }

  std::vector<Point> pts_;
  int dim_ = 2;
  std::vector<int> perm_;
  std::vector<Node> nodes_;
};

}  // namespace coronalab
