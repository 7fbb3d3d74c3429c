#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "decreg/correspondence.hpp"
#include "decreg/dataset.hpp"
#include "decreg/defaults.hpp"
#include "decreg/geometry.hpp"
#include "decreg/metrics.hpp"
#include "decreg/random.hpp"

namespace decreg {

// Desk-scale scene pairs with exact ground truth: a room of planes and
// boxes, two partial views cut along a random direction, a sampled rigid
// motion, and a correspondence set hitting a configured inlier ratio.
struct SyntheticSceneConfig {
    int points_per_view = 5000;
    double overlap_target = 0.5;  // fraction of the source view shared with the target
    double noise_sigma = 0.005;   // per-axis sensor noise, meters
    double inlier_ratio = 0.05;
    int correspondence_count = 200;
    double rotation_min_deg = 10.0;
    double rotation_max_deg = 60.0;
    double translation_min = 0.5;
    double translation_max = 2.0;
    std::uint64_t seed = 0;
    double tau_ov = defaults::kTauOv;  // gate used when measuring the realized overlap
    double tau_in = defaults::kTauIn;
};

namespace detail {

struct Rect {
    Vec3 origin;
    Vec3 u;
    Vec3 v;
    double area;
};

inline void add_rect(std::vector<Rect>& rects, const Vec3& origin, const Vec3& u, const Vec3& v) {
    rects.push_back(Rect{origin, u, v, u.norm() * v.norm()});
}

// Floor, two walls and a couple of boxes; points sampled by surface area.
inline std::vector<Vec3> sample_room_scene(Rng& rng, std::size_t count) {
    const double length = rng.uniform(3.0, 5.0);
    const double width = rng.uniform(3.0, 5.0);
    const double height = rng.uniform(2.0, 3.0);

    std::vector<Rect> rects;
    add_rect(rects, {0, 0, 0}, {length, 0, 0}, {0, width, 0});   // floor
    add_rect(rects, {0, 0, 0}, {length, 0, 0}, {0, 0, height});  // wall y=0
    add_rect(rects, {0, 0, 0}, {0, width, 0}, {0, 0, height});   // wall x=0

    for (int b = 0; b < 2; ++b) {
        const double sx = rng.uniform(0.3, 0.8);
        const double sy = rng.uniform(0.3, 0.8);
        const double sz = rng.uniform(0.3, 1.2);
        const double cx = rng.uniform(0.2 * length, 0.8 * length - sx);
        const double cy = rng.uniform(0.2 * width, 0.8 * width - sy);
        const Vec3 o{cx, cy, 0.0};
        add_rect(rects, o + Vec3{0, 0, sz}, {sx, 0, 0}, {0, sy, 0});  // top
        add_rect(rects, o, {sx, 0, 0}, {0, 0, sz});                   // y- face
        add_rect(rects, o + Vec3{0, sy, 0}, {sx, 0, 0}, {0, 0, sz});  // y+ face
        add_rect(rects, o, {0, sy, 0}, {0, 0, sz});                   // x- face
        add_rect(rects, o + Vec3{sx, 0, 0}, {0, sy, 0}, {0, 0, sz});  // x+ face
    }

    std::vector<double> areas;
    areas.reserve(rects.size());
    for (const auto& r : rects) areas.push_back(r.area);

    std::vector<Vec3> points;
    points.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const Rect& r = rects[rng.weighted_index(areas)];
        points.push_back(r.origin + rng.uniform01() * r.u + rng.uniform01() * r.v);
    }
    return points;
}

inline Vec3 random_unit_vector(Rng& rng) {
    while (true) {
        const Vec3 v{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        const double n = v.norm();
        if (n > 1e-3 && n <= 1.0) return v / n;
    }
}

inline Mat3 rotation_about_axis(const Vec3& axis, double angle_rad) {
    return Eigen::AngleAxisd(angle_rad, axis).toRotationMatrix();
}

}  // namespace detail

// Builds one scene pair. The realized overlap is measured against the
// ground truth and the scene is resampled until it lands within the
// contract band; OverlapUnachievable is raised after bounded retries.
inline std::pair<PairRecord, CorrespondenceSet> generate_scene_pair(
    const SyntheticSceneConfig& cfg, const std::string& pair_id = "") {
    if (cfg.points_per_view < 10) throw Error("generate_scene_pair: too few points per view");
    if (cfg.overlap_target <= 0.0 || cfg.overlap_target > 1.0) {
        throw Error("generate_scene_pair: overlap target must be in (0,1]");
    }
    if (cfg.inlier_ratio <= 0.0 || cfg.inlier_ratio > 1.0) {
        throw Error("generate_scene_pair: inlier ratio must be in (0,1]");
    }

    constexpr int kMaxRetries = 20;
    for (int retry = 0; retry < kMaxRetries; ++retry) {
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(retry)));

        const std::size_t ppv = static_cast<std::size_t>(cfg.points_per_view);
        const std::size_t shared =
            std::min(ppv, static_cast<std::size_t>(std::lround(cfg.overlap_target * ppv)));
        const std::size_t scene_count = 2 * ppv - shared;

        std::vector<Vec3> scene = detail::sample_room_scene(rng, scene_count);

        // cut the two views along a random horizontal direction
        const double marching_angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
        const Vec3 cut_dir{std::cos(marching_angle), std::sin(marching_angle), 0.0};
        std::vector<std::size_t> order(scene.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double pa = scene[a].dot(cut_dir);
            const double pb = scene[b].dot(cut_dir);
            return pa < pb || (pa == pb && a < b);
        });

        // view A: lowest-projection ppv points; view B: highest ppv points
        std::vector<std::size_t> view_a(order.begin(), order.begin() + static_cast<long>(ppv));
        std::vector<std::size_t> view_b(order.end() - static_cast<long>(ppv), order.end());

        auto view_centroid = [&](const std::vector<std::size_t>& view) {
            Vec3 c = Vec3::Zero();
            for (std::size_t i : view) c += scene[i];
            return Vec3{c / static_cast<double>(view.size())};
        };
        const Vec3 room_center{2.0, 2.0, 0.0};
        auto make_viewpoint = [&](const std::vector<std::size_t>& view) {
            Vec3 vp = 0.7 * view_centroid(view) + 0.3 * room_center;
            vp.z() = rng.uniform(1.3, 1.8);  // sensor height
            return vp;
        };

        PointCloud target;
        target.points.reserve(ppv);
        std::vector<std::size_t> scene_to_target(scene.size(), scene.size());
        for (std::size_t i : view_b) {
            Vec3 p = scene[i];
            for (int a = 0; a < 3; ++a) p(a) += rng.gaussian(0.0, cfg.noise_sigma);
            scene_to_target[i] = target.points.size();
            target.points.push_back(p);
        }
        target.viewpoint = make_viewpoint(view_b);

        // ground truth maps source frame -> target (world) frame
        const double angle =
            rng.uniform(cfg.rotation_min_deg, cfg.rotation_max_deg) / kRadToDeg;
        const Vec3 axis = detail::random_unit_vector(rng);
        RigidTransform gt;
        gt.rotation = detail::rotation_about_axis(axis, angle);
        gt.translation = rng.uniform(cfg.translation_min, cfg.translation_max) *
                         detail::random_unit_vector(rng);
        const RigidTransform world_to_source = invert(gt);

        PointCloud source;
        source.points.reserve(ppv);
        std::vector<std::size_t> scene_to_source(scene.size(), scene.size());
        const Vec3 source_viewpoint_world = make_viewpoint(view_a);
        for (std::size_t i : view_a) {
            Vec3 p = scene[i];
            for (int a = 0; a < 3; ++a) p(a) += rng.gaussian(0.0, cfg.noise_sigma);
            scene_to_source[i] = source.points.size();
            source.points.push_back(world_to_source(p));
        }
        source.viewpoint = world_to_source(source_viewpoint_world);

        PairRecord pair;
        pair.source = std::move(source);
        pair.target = std::move(target);
        pair.ground_truth = gt;
        pair.pair_id = pair_id.empty() ? "pair_" + std::to_string(cfg.seed) : pair_id;

        const double realized =
            overlap_ratio(pair.source, pair.target, pair.ground_truth, cfg.tau_ov);
        if (std::abs(realized - cfg.overlap_target) > 0.045 && cfg.overlap_target < 0.99) {
            continue;  // resample the scene
        }

        // correspondences: exact counterparts on the shared slab + outliers
        std::vector<std::size_t> shared_indices;
        for (std::size_t i : view_a) {
            if (scene_to_target[i] != scene.size()) shared_indices.push_back(i);
        }
        if (shared_indices.empty()) continue;

        const int total = cfg.correspondence_count;
        const int want_inliers = std::max(
            1, static_cast<int>(std::lround(cfg.inlier_ratio * static_cast<double>(total))));

        CorrespondenceSet cs;
        cs.provenance = "synthetic";
        cs.items.reserve(static_cast<std::size_t>(total));
        bool feasible = true;
        for (int n = 0; n < want_inliers; ++n) {
            int attempts = 0;
            while (true) {
                if (++attempts > 1000) {
                    feasible = false;
                    break;
                }
                const std::size_t scene_idx =
                    shared_indices[rng.uniform_index(shared_indices.size())];
                const Vec3& p = pair.source.points[scene_to_source[scene_idx]];
                const Vec3& q = pair.target.points[scene_to_target[scene_idx]];
                if ((gt(p) - q).norm() > 0.9 * cfg.tau_in) continue;  // noise outlier, redraw
                cs.items.push_back(Correspondence{p, q});
                break;
            }
            if (!feasible) break;
        }
        if (!feasible) continue;

        while (cs.items.size() < static_cast<std::size_t>(total)) {
            const Vec3& p = pair.source.points[rng.uniform_index(pair.source.size())];
            const Vec3& q = pair.target.points[rng.uniform_index(pair.target.size())];
            if ((gt(p) - q).norm() <= 2.0 * cfg.tau_in) continue;
            cs.items.push_back(Correspondence{p, q});
        }
        rng.shuffle(cs.items);

        return {std::move(pair), std::move(cs)};
    }
    throw OverlapUnachievable("generate_scene_pair: overlap target not reached after retries");
}

}  // namespace decreg
