#pragma once

#include <algorithm>
#include <cmath>
#include <unordered_set>
#include <vector>

#include "decreg/correspondence.hpp"
#include "decreg/defaults.hpp"
#include "decreg/geometry.hpp"
#include "decreg/kdtree.hpp"

namespace decreg {

struct SuccessThreshold {
    double max_re_deg = defaults::kSuccessMaxReDeg;
    double max_te = defaults::kSuccessMaxTe;
};

struct PairResult {
    RigidTransform estimated;
    RigidTransform ground_truth;
    double score = 0.0;
    double re_deg = 0.0;
    double te = 0.0;
    bool success = false;
};

inline constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;

// Geodesic angle acos((trace(R_hat^T R_star) - 1) / 2) in degrees. The
// cosine is clamped to [-1, 1] so floating-point noise cannot produce
// NaN, and the angle is evaluated through atan2 with the sine taken from
// the skew part: the plain acos form loses ~1e-6 deg of resolution near
// zero, which is coarser than exact pose recovery needs.
inline double rotation_error(const Mat3& r_hat, const Mat3& r_star) {
    const Mat3 m = r_hat.transpose() * r_star;
    const double cos_theta = std::clamp((m.trace() - 1.0) / 2.0, -1.0, 1.0);
    const Vec3 axial{m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)};
    const double sin_theta = 0.5 * axial.norm();
    return std::atan2(sin_theta, cos_theta) * kRadToDeg;
}

inline double translation_error(const Vec3& t_hat, const Vec3& t_star) {
    return (t_hat - t_star).norm();
}

inline double rotation_error(const RigidTransform& a, const RigidTransform& b) {
    return rotation_error(a.rotation, b.rotation);
}

inline double translation_error(const RigidTransform& a, const RigidTransform& b) {
    return translation_error(a.translation, b.translation);
}

inline int inlier_count(const RigidTransform& t, const CorrespondenceSet& cs, double tau_in) {
    int count = 0;
    for (const auto& c : cs.items) {
        if ((t(c.src) - c.tgt).norm() <= tau_in) ++count;
    }
    return count;
}

inline bool is_success(const RigidTransform& est, const RigidTransform& gt,
                       const SuccessThreshold& th = {}) {
    return rotation_error(est, gt) <= th.max_re_deg && translation_error(est, gt) <= th.max_te;
}

inline double registration_recall(const std::vector<PairResult>& results) {
    if (results.empty()) throw EmptyResultSet("registration_recall: no results");
    std::size_t successes = 0;
    for (const auto& r : results) successes += r.success ? 1 : 0;
    return static_cast<double>(successes) / static_cast<double>(results.size());
}

// Fraction of pairs whose first min(m, K) ranked hypotheses contain at
// least one transform passing is_success.
inline double top_m_rr(
    const std::vector<std::pair<std::vector<Hypothesis>, RigidTransform>>& per_pair_hypotheses,
    const SuccessThreshold& th, std::size_t m) {
    if (per_pair_hypotheses.empty()) throw EmptyResultSet("top_m_rr: no pairs");
    if (m < 1) throw Error("top_m_rr: m must be >= 1");
    std::size_t hits = 0;
    for (const auto& [hyps, gt] : per_pair_hypotheses) {
        const std::size_t scan = std::min(m, hyps.size());
        for (std::size_t i = 0; i < scan; ++i) {
            if (is_success(hyps[i].transform, gt, th)) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(per_pair_hypotheses.size());
}

// Fraction of T(P) points whose nearest neighbor in Q lies within
// tau_ov. The overload taking a prebuilt index serves callers that test
// many transforms against one target.
inline double overlap_ratio(const PointCloud& p, const KdTree& q_index, const RigidTransform& t,
                            double tau_ov = defaults::kTauOv) {
    if (p.empty()) throw EmptyCloud("overlap_ratio: empty cloud");
    if (tau_ov <= 0.0) throw Error("overlap_ratio: tau_ov must be > 0");
    std::size_t within = 0;
    for (const auto& point : p.points) {
        if (q_index.nearest_distance(t(point)) <= tau_ov) ++within;
    }
    return static_cast<double>(within) / static_cast<double>(p.points.size());
}

inline double overlap_ratio(const PointCloud& p, const PointCloud& q, const RigidTransform& t,
                            double tau_ov = defaults::kTauOv) {
    if (q.empty()) throw EmptyCloud("overlap_ratio: empty cloud");
    return overlap_ratio(p, KdTree(q), t, tau_ov);
}

// Symmetric mean of min(nearest-cross-cloud distance, tau_c), both
// directions averaged.
inline double truncated_chamfer(const PointCloud& p_prime, const PointCloud& q,
                                double tau_c = defaults::kTauC) {
    if (p_prime.empty() || q.empty()) throw EmptyCloud("truncated_chamfer: empty cloud");
    if (tau_c <= 0.0) throw Error("truncated_chamfer: tau_c must be > 0");
    const KdTree index_q(q);
    const KdTree index_p(p_prime);
    double forward = 0.0;
    for (const auto& point : p_prime.points) {
        forward += std::min(index_q.nearest_distance(point), tau_c);
    }
    forward /= static_cast<double>(p_prime.points.size());
    double backward = 0.0;
    for (const auto& point : q.points) {
        backward += std::min(index_p.nearest_distance(point), tau_c);
    }
    backward /= static_cast<double>(q.points.size());
    return 0.5 * (forward + backward);
}

namespace detail {

using VoxelSet = std::unordered_set<VoxelKey, VoxelKeyHash>;

// Amanatides-Woo voxel traversal from `from` to `to`; visits each voxel
// the segment crosses, endpoint voxel included.
template <typename Visit>
inline void traverse_segment(const Vec3& from, const Vec3& to, double grid, Visit&& visit) {
    VoxelKey cell = voxel_of(from, grid);
    const VoxelKey last = voxel_of(to, grid);
    visit(cell);
    if (cell == last) return;

    const Vec3 dir = to - from;
    const double len = dir.norm();
    if (len <= 0.0) return;

    std::int64_t* cell_axis[3] = {&cell.x, &cell.y, &cell.z};
    std::int64_t step[3];
    double t_max[3];
    double t_delta[3];
    for (int a = 0; a < 3; ++a) {
        if (dir(a) > 0.0) {
            step[a] = 1;
            const double boundary = (static_cast<double>(*cell_axis[a]) + 1.0) * grid;
            t_max[a] = (boundary - from(a)) / dir(a);
            t_delta[a] = grid / dir(a);
        } else if (dir(a) < 0.0) {
            step[a] = -1;
            const double boundary = static_cast<double>(*cell_axis[a]) * grid;
            t_max[a] = (boundary - from(a)) / dir(a);
            t_delta[a] = -grid / dir(a);
        } else {
            step[a] = 0;
            t_max[a] = std::numeric_limits<double>::infinity();
            t_delta[a] = std::numeric_limits<double>::infinity();
        }
    }

    // guard against pathological boundary cases
    const int max_steps = 3 * (static_cast<int>(len / grid) + 2);
    for (int i = 0; i < max_steps; ++i) {
        int a = 0;
        if (t_max[1] < t_max[a]) a = 1;
        if (t_max[2] < t_max[a]) a = 2;
        if (t_max[a] > 1.0) return;  // segment ends inside the current voxel
        *cell_axis[a] += step[a];
        t_max[a] += t_delta[a];
        visit(cell);
        if (cell == last) return;
    }
}

}  // namespace detail

// Occupancy model for the sight-view constraint: voxels crossed by rays
// from the target viewpoint to target points are free space, except the
// voxels the target surface itself occupies. Built once per target, it
// can be queried against many candidate transforms.
class FreeSpaceGrid {
public:
    FreeSpaceGrid(const PointCloud& q, double grid) : grid_(grid), target_index_(q) {
        if (q.empty()) throw EmptyCloud("FreeSpaceGrid: empty cloud");
        if (grid <= 0.0) throw Error("FreeSpaceGrid: grid must be > 0");
        if (!q.viewpoint) throw MissingViewpoint("FreeSpaceGrid: target viewpoint required");

        detail::VoxelSet surface;
        for (const auto& point : q.points) surface.insert(detail::voxel_of(point, grid_));
        for (const auto& point : q.points) {
            detail::traverse_segment(*q.viewpoint, point, grid_, [&](const detail::VoxelKey& cell) {
                if (!surface.contains(cell)) free_.insert(cell);
            });
        }
    }

    double grid() const { return grid_; }

    // Fraction of T(P) points sitting in carved free space farther than
    // one grid step from any target point.
    double violation_ratio(const PointCloud& p, const RigidTransform& t) const {
        if (p.empty()) throw EmptyCloud("FreeSpaceGrid: empty source cloud");
        std::size_t violations = 0;
        for (const auto& point : p.points) {
            const Vec3 moved = t(point);
            if (!free_.contains(detail::voxel_of(moved, grid_))) continue;
            if (target_index_.nearest_distance(moved) > grid_) ++violations;
        }
        return static_cast<double>(violations) / static_cast<double>(p.points.size());
    }

private:
    double grid_;
    KdTree target_index_;
    detail::VoxelSet free_;
};

inline double free_space_violation_ratio(const PointCloud& p, const PointCloud& q,
                                         const RigidTransform& t,
                                         double grid = defaults::kSvcGrid) {
    return FreeSpaceGrid(q, grid).violation_ratio(p, t);
}

// True (hypothesis kept) iff the free-space violation ratio stays within
// max_violation. Both clouds must carry viewpoints; callers that cannot
// provide them skip SVC filtering instead of failing.
inline bool svc_check(const PointCloud& p, const PointCloud& q, const RigidTransform& t,
                      double grid = defaults::kSvcGrid,
                      double max_violation = defaults::kSvcMaxViolation) {
    if (!p.viewpoint || !q.viewpoint) {
        throw MissingViewpoint("svc_check: both clouds must carry viewpoints");
    }
    return free_space_violation_ratio(p, q, t, grid) <= max_violation;
}

}  // namespace decreg
