#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "decreg/defaults.hpp"
#include "decreg/errors.hpp"

namespace decreg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Ordered set of 3D points in meters, with an optional sensor origin.
struct PointCloud {
    std::vector<Vec3> points;
    std::optional<Vec3> viewpoint;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

// Rotation + translation pair. Rotations are kept orthonormal with
// determinant +1; see is_valid_rotation for the tolerance.
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static RigidTransform identity() { return {}; }

    Vec3 operator()(const Vec3& p) const { return rotation * p + translation; }
};

inline bool is_valid_rotation(const Mat3& r, double tol = defaults::kRotationTolerance) {
    const Mat3 residual = r.transpose() * r - Mat3::Identity();
    return residual.cwiseAbs().maxCoeff() <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

inline RigidTransform invert(const RigidTransform& t) {
    RigidTransform inv;
    inv.rotation = t.rotation.transpose();
    inv.translation = -(inv.rotation * t.translation);
    return inv;
}

// compose(a, b) applies b first, then a.
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    RigidTransform out;
    out.rotation = a.rotation * b.rotation;
    out.translation = a.rotation * b.translation + a.translation;
    return out;
}

inline PointCloud apply_transform(const RigidTransform& t, const PointCloud& c) {
    if (c.empty()) throw EmptyCloud("apply_transform: empty cloud");
    PointCloud out;
    out.points.reserve(c.points.size());
    for (const auto& p : c.points) out.points.push_back(t(p));
    if (c.viewpoint) out.viewpoint = t(*c.viewpoint);
    return out;
}

// Least-squares rigid transform minimizing sum ||R p_i + t - q_i||^2
// (Kabsch). Reflections are rejected by flipping the smallest singular
// direction. Throws DegenerateConfiguration when the centered
// cross-covariance has rank < 2 (coincident or collinear points).
inline RigidTransform estimate_rigid(const std::vector<Vec3>& src_points,
                                     const std::vector<Vec3>& tgt_points) {
    if (src_points.size() != tgt_points.size() || src_points.size() < 3) {
        throw DegenerateConfiguration("estimate_rigid: needs >= 3 point pairs of equal length");
    }
    const double n = static_cast<double>(src_points.size());
    Vec3 src_centroid = Vec3::Zero();
    Vec3 tgt_centroid = Vec3::Zero();
    for (std::size_t i = 0; i < src_points.size(); ++i) {
        src_centroid += src_points[i];
        tgt_centroid += tgt_points[i];
    }
    src_centroid /= n;
    tgt_centroid /= n;

    Mat3 cross = Mat3::Zero();
    for (std::size_t i = 0; i < src_points.size(); ++i) {
        cross += (src_points[i] - src_centroid) * (tgt_points[i] - tgt_centroid).transpose();
    }

    Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 sv = svd.singularValues();
    if (sv(0) <= 0.0 || sv(1) < sv(0) * defaults::kDegeneracyRatio) {
        throw DegenerateConfiguration("estimate_rigid: rank-deficient cross-covariance");
    }

    Mat3 d = Mat3::Identity();
    d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;

    RigidTransform t;
    t.rotation = svd.matrixV() * d * svd.matrixU().transpose();
    t.translation = tgt_centroid - t.rotation * src_centroid;
    return t;
}

namespace detail {

struct VoxelKey {
    std::int64_t x, y, z;
    bool operator==(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
    std::size_t operator()(const VoxelKey& k) const {
        std::uint64_t h = 0xCBF29CE484222325ULL;
        for (std::int64_t v : {k.x, k.y, k.z}) {
            h ^= static_cast<std::uint64_t>(v);
            h *= 0x100000001B3ULL;
        }
        return static_cast<std::size_t>(h);
    }
};

inline VoxelKey voxel_of(const Vec3& p, double voxel) {
    return {static_cast<std::int64_t>(std::floor(p.x() / voxel)),
            static_cast<std::int64_t>(std::floor(p.y() / voxel)),
            static_cast<std::int64_t>(std::floor(p.z() / voxel))};
}

}  // namespace detail

// One centroid per occupied voxel. Output cells appear in the order their
// first member appears in the input, which makes the result deterministic.
inline PointCloud voxel_downsample(const PointCloud& c, double voxel) {
    if (voxel <= 0.0) throw NonPositiveVoxel("voxel_downsample: voxel must be > 0");
    if (c.empty()) throw EmptyCloud("voxel_downsample: empty cloud");

    struct Cell {
        Vec3 sum = Vec3::Zero();
        std::size_t count = 0;
    };
    std::unordered_map<detail::VoxelKey, std::size_t, detail::VoxelKeyHash> index;
    std::vector<Cell> cells;
    for (const auto& p : c.points) {
        const auto key = detail::voxel_of(p, voxel);
        auto [it, inserted] = index.try_emplace(key, cells.size());
        if (inserted) cells.emplace_back();
        auto& cell = cells[it->second];
        cell.sum += p;
        cell.count += 1;
    }

    PointCloud out;
    out.points.reserve(cells.size());
    for (const auto& cell : cells) out.points.push_back(cell.sum / static_cast<double>(cell.count));
    out.viewpoint = c.viewpoint;
    return out;
}

}  // namespace decreg
