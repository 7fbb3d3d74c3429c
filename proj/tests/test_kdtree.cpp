#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <limits>
#include <vector>

#include "decreg/kdtree.hpp"
#include "test_helpers.hpp"

using namespace decreg;

namespace {

// linear-scan oracle with the same tie rule (lowest index wins)
std::pair<std::size_t, double> brute_nearest(const PointCloud& cloud, const Vec3& q) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        const double d = (cloud.points[i] - q).norm();
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return {best, best_d};
}

std::vector<std::size_t> brute_radius(const PointCloud& cloud, const Vec3& q, double r) {
    std::vector<std::size_t> hits;
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        if ((cloud.points[i] - q).norm() <= r) hits.push_back(i);
    }
    return hits;
}

}  // namespace

TEST_CASE("query at an existing point returns that point at distance zero") {
    Rng rng(21);
    const PointCloud cloud = testing::random_cloud(rng, 100);
    const KdTree tree(cloud);
    for (std::size_t i = 0; i < cloud.points.size(); i += 7) {
        const auto [idx, dist] = tree.nearest(cloud.points[i]);
        REQUIRE(dist == 0.0);
        REQUIRE((cloud.points[idx] - cloud.points[i]).norm() == 0.0);
    }
}

TEST_CASE("radius zero at an existing point returns exactly the coincident points") {
    PointCloud cloud;
    cloud.points.emplace_back(1.0, 1.0, 1.0);
    cloud.points.emplace_back(2.0, 2.0, 2.0);
    cloud.points.emplace_back(1.0, 1.0, 1.0);  // duplicate of point 0
    const KdTree tree(cloud);
    const auto hits = tree.radius_search(Vec3{1.0, 1.0, 1.0}, 0.0);
    REQUIRE(hits == std::vector<std::size_t>{0, 2});
}

TEST_CASE("nearest matches the exhaustive scan on random queries") {
    Rng rng(22);
    const PointCloud cloud = testing::random_cloud(rng, 200);
    const KdTree tree(cloud);
    for (int trial = 0; trial < 50; ++trial) {
        const Vec3 q{rng.uniform(-2.5, 2.5), rng.uniform(-2.5, 2.5), rng.uniform(-2.5, 2.5)};
        const auto [idx, dist] = tree.nearest(q);
        const auto [oracle_idx, oracle_dist] = brute_nearest(cloud, q);
        REQUIRE(idx == oracle_idx);
        REQUIRE(dist == Catch::Approx(oracle_dist).margin(1e-12));
    }
}

TEST_CASE("radius search matches the exhaustive scan") {
    Rng rng(23);
    const PointCloud cloud = testing::random_cloud(rng, 200);
    const KdTree tree(cloud);
    for (int trial = 0; trial < 50; ++trial) {
        const Vec3 q{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
        const double r = rng.uniform(0.0, 1.5);
        REQUIRE(tree.radius_search(q, r) == brute_radius(cloud, q, r));
    }
}

TEST_CASE("knearest returns ascending distances and matches a sorted scan") {
    Rng rng(24);
    const PointCloud cloud = testing::random_cloud(rng, 150);
    const KdTree tree(cloud);
    for (int trial = 0; trial < 25; ++trial) {
        const Vec3 q{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
        const std::size_t k = 1 + rng.uniform_index(12);
        const auto got = tree.knearest(q, k);
        REQUIRE(got.size() == k);

        std::vector<std::pair<double, std::size_t>> all;
        for (std::size_t i = 0; i < cloud.points.size(); ++i) {
            all.emplace_back((cloud.points[i] - q).norm(), i);
        }
        std::sort(all.begin(), all.end());
        for (std::size_t i = 0; i < k; ++i) REQUIRE(got[i] == all[i].second);
    }
}

TEST_CASE("degenerate clouds still index correctly") {
    PointCloud cloud;
    for (int i = 0; i < 10; ++i) cloud.points.emplace_back(0.0, 0.0, static_cast<double>(i));
    const KdTree tree(cloud);  // collinear input
    const auto [idx, dist] = tree.nearest(Vec3{0.0, 0.0, 4.2});
    REQUIRE(idx == 4);
    REQUIRE(dist == Catch::Approx(0.2).margin(1e-12));
}

TEST_CASE("empty cloud is rejected") {
    REQUIRE_THROWS_AS(KdTree(PointCloud{}), EmptyCloud);
}
