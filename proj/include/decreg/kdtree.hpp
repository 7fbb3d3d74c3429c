#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "decreg/errors.hpp"
#include "decreg/geometry.hpp"

namespace decreg {

// Exact nearest-neighbor index over a point cloud. Static after build;
// concurrent reads are safe. Ties on distance resolve to the lowest
// point index so results match a linear scan.
class KdTree {
public:
    explicit KdTree(const PointCloud& cloud) : points_(cloud.points) {
        if (points_.empty()) throw EmptyCloud("KdTree: empty cloud");
        order_.resize(points_.size());
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        nodes_.reserve(points_.size());
        root_ = build(0, points_.size());
    }

    std::size_t size() const { return points_.size(); }

    // Returns (point index, distance) of the exact nearest neighbor.
    std::pair<std::size_t, double> nearest(const Vec3& query) const {
        Best best{std::numeric_limits<double>::infinity(), points_.size()};
        search_nearest(root_, query, best);
        return {best.index, std::sqrt(best.dist_sq)};
    }

    double nearest_distance(const Vec3& query) const { return nearest(query).second; }

    // All point indices within distance <= radius, ascending by index.
    std::vector<std::size_t> radius_search(const Vec3& query, double radius) const {
        if (radius < 0.0) throw Error("radius_search: radius must be >= 0");
        std::vector<std::size_t> hits;
        search_radius(root_, query, radius * radius, hits);
        std::sort(hits.begin(), hits.end());
        return hits;
    }

    // Indices of the k nearest points, nearest first; ties by lower index.
    std::vector<std::size_t> knearest(const Vec3& query, std::size_t k) const {
        k = std::min(k, points_.size());
        if (k == 0) return {};
        NeighborList list(k);
        search_knn(root_, query, list);
        std::vector<std::size_t> out;
        out.reserve(list.entries.size());
        for (const auto& [dist_sq, index] : list.entries) out.push_back(index);
        return out;
    }

private:
    struct Node {
        std::size_t point = 0;
        int axis = 0;
        std::int32_t left = -1;
        std::int32_t right = -1;
    };

    struct Best {
        double dist_sq;
        std::size_t index;
    };

    // bounded sorted candidate list; k is small so insertion is cheap
    struct NeighborList {
        explicit NeighborList(std::size_t capacity_) : capacity(capacity_) {
            entries.reserve(capacity_);
        }

        void offer(double dist_sq, std::size_t index) {
            const std::pair<double, std::size_t> entry{dist_sq, index};
            if (entries.size() == capacity) {
                if (entry >= entries.back()) return;
                entries.pop_back();
            }
            entries.insert(std::upper_bound(entries.begin(), entries.end(), entry), entry);
        }

        double worst() const { return entries.back().first; }
        bool full() const { return entries.size() == capacity; }

        std::size_t capacity;
        std::vector<std::pair<double, std::size_t>> entries;
    };

    std::int32_t build(std::size_t begin, std::size_t end) {
        if (begin >= end) return -1;
        // split on the widest axis of this subset
        Vec3 lo = points_[order_[begin]];
        Vec3 hi = lo;
        for (std::size_t i = begin + 1; i < end; ++i) {
            lo = lo.cwiseMin(points_[order_[i]]);
            hi = hi.cwiseMax(points_[order_[i]]);
        }
        int axis = 0;
        (hi - lo).maxCoeff(&axis);

        const std::size_t mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](std::size_t a, std::size_t b) {
                             const double ca = points_[a](axis);
                             const double cb = points_[b](axis);
                             return ca < cb || (ca == cb && a < b);
                         });

        const std::int32_t id = static_cast<std::int32_t>(nodes_.size());
        nodes_.push_back(Node{order_[mid], axis, -1, -1});
        const std::int32_t left = build(begin, mid);
        const std::int32_t right = build(mid + 1, end);
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    void search_nearest(std::int32_t id, const Vec3& query, Best& best) const {
        if (id < 0) return;
        const Node& node = nodes_[id];
        const double d2 = (points_[node.point] - query).squaredNorm();
        if (d2 < best.dist_sq || (d2 == best.dist_sq && node.point < best.index)) {
            best = {d2, node.point};
        }
        const double delta = query(node.axis) - points_[node.point](node.axis);
        const std::int32_t near = delta < 0.0 ? node.left : node.right;
        const std::int32_t far = delta < 0.0 ? node.right : node.left;
        search_nearest(near, query, best);
        if (delta * delta <= best.dist_sq) search_nearest(far, query, best);
    }

    void search_radius(std::int32_t id, const Vec3& query, double radius_sq,
                       std::vector<std::size_t>& hits) const {
        if (id < 0) return;
        const Node& node = nodes_[id];
        if ((points_[node.point] - query).squaredNorm() <= radius_sq) hits.push_back(node.point);
        const double delta = query(node.axis) - points_[node.point](node.axis);
        const std::int32_t near = delta < 0.0 ? node.left : node.right;
        const std::int32_t far = delta < 0.0 ? node.right : node.left;
        search_radius(near, query, radius_sq, hits);
        if (delta * delta <= radius_sq) search_radius(far, query, radius_sq, hits);
    }

    void search_knn(std::int32_t id, const Vec3& query, NeighborList& list) const {
        if (id < 0) return;
        const Node& node = nodes_[id];
        list.offer((points_[node.point] - query).squaredNorm(), node.point);
        const double delta = query(node.axis) - points_[node.point](node.axis);
        const std::int32_t near = delta < 0.0 ? node.left : node.right;
        const std::int32_t far = delta < 0.0 ? node.right : node.left;
        search_knn(near, query, list);
        if (!list.full() || delta * delta <= list.worst()) {
            search_knn(far, query, list);
        }
    }

    std::vector<Vec3> points_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
    std::int32_t root_ = -1;
};

}  // namespace decreg
