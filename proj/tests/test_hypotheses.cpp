#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "decreg/hypotheses.hpp"
#include "test_helpers.hpp"

using namespace decreg;

namespace {

struct LabeledSet {
    CorrespondenceSet cs;
    RigidTransform gt;
};

LabeledSet inlier_outlier_set(Rng& rng, std::size_t inliers, std::size_t outliers) {
    LabeledSet out;
    out.gt = testing::random_transform(rng);
    for (std::size_t i = 0; i < inliers; ++i) {
        const Vec3 p{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        out.cs.items.push_back(Correspondence{p, out.gt(p)});
    }
    for (std::size_t i = 0; i < outliers; ++i) {
        const Vec3 p{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        Vec3 q{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        while ((out.gt(p) - q).norm() < 0.3) q += Vec3{0.5, 0.5, 0.5};
        out.cs.items.push_back(Correspondence{p, q});
    }
    Rng shuffle_rng(rng.next_u64());
    shuffle_rng.shuffle(out.cs.items);
    return out;
}

}  // namespace

TEST_CASE("perfect inliers produce hypotheses matching the generating transform") {
    Rng rng(51);
    const LabeledSet set = inlier_outlier_set(rng, 50, 0);
    const auto hyps = generate_hypotheses(set.cs, 10, 0.1, 0.1, 7);
    REQUIRE_FALSE(hyps.empty());
    for (const auto& h : hyps) {
        REQUIRE(rotation_error(h.transform, set.gt) <= 1e-3);
        REQUIRE(translation_error(h.transform, set.gt) <= 1e-6);
    }
}

TEST_CASE("three correspondences admit exactly the one exact-fit hypothesis") {
    Rng rng(52);
    const LabeledSet set = inlier_outlier_set(rng, 3, 0);
    const auto hyps = generate_hypotheses(set.cs, 1, 0.1, 0.1, 3);
    REQUIRE(hyps.size() == 1);
    REQUIRE(hyps[0].rank == 0);
    REQUIRE(hyps[0].inlier_count == 3);
    REQUIRE(rotation_error(hyps[0].transform, set.gt) <= 1e-6);
}

TEST_CASE("same seed reproduces bit-identical hypothesis lists") {
    Rng rng(53);
    const LabeledSet set = inlier_outlier_set(rng, 10, 40);
    const auto a = generate_hypotheses(set.cs, 20, 0.1, 0.1, 99);
    const auto b = generate_hypotheses(set.cs, 20, 0.1, 0.1, 99);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE((a[i].transform.rotation - b[i].transform.rotation).cwiseAbs().maxCoeff() == 0.0);
        REQUIRE((a[i].transform.translation - b[i].transform.translation).norm() == 0.0);
        REQUIRE(a[i].inlier_count == b[i].inlier_count);
        REQUIRE(a[i].rank == b[i].rank);
    }
}

TEST_CASE("different seeds explore different subsets") {
    Rng rng(54);
    const LabeledSet set = inlier_outlier_set(rng, 10, 40);
    const auto a = generate_hypotheses(set.cs, 20, 0.1, 0.1, 1);
    const auto b = generate_hypotheses(set.cs, 20, 0.1, 0.1, 2);
    bool any_difference = a.size() != b.size();
    for (std::size_t i = 0; !any_difference && i < a.size(); ++i) {
        any_difference = (a[i].transform.translation - b[i].transform.translation).norm() > 0.0;
    }
    REQUIRE(any_difference);
}

TEST_CASE("too few correspondences are rejected") {
    CorrespondenceSet cs;
    cs.items.push_back(Correspondence{{0, 0, 0}, {1, 0, 0}});
    cs.items.push_back(Correspondence{{1, 0, 0}, {2, 0, 0}});
    REQUIRE_THROWS_AS(generate_hypotheses(cs, 5, 0.1, 0.1, 0), InsufficientCorrespondences);
}

TEST_CASE("collinear-only correspondences exhaust the attempt budget") {
    CorrespondenceSet cs;
    for (int i = 0; i < 5; ++i) {
        const Vec3 p{static_cast<double>(i), 0.0, 0.0};
        cs.items.push_back(Correspondence{p, p + Vec3{0.0, 1.0, 0.0}});
    }
    REQUIRE_THROWS_AS(generate_hypotheses(cs, 5, 0.1, 0.1, 0), AllSubsetsDegenerate);
}

TEST_CASE("rank_by_inlier_count sorts descending and rewrites ranks") {
    Rng rng(55);
    const LabeledSet set = inlier_outlier_set(rng, 12, 28);

    SECTION("single hypothesis gets rank zero") {
        std::vector<Hypothesis> hyps{Hypothesis{set.gt, 0, 7}};
        const auto ranked = rank_by_inlier_count(hyps, set.cs, 0.1);
        REQUIRE(ranked.size() == 1);
        REQUIRE(ranked[0].rank == 0);
        REQUIRE(ranked[0].inlier_count >= 12);
    }

    SECTION("two hypotheses swap into count order") {
        // a transform fitting nothing vs the ground truth
        RigidTransform far_off = set.gt;
        far_off.translation += Vec3{10, 10, 10};
        std::vector<Hypothesis> hyps{Hypothesis{far_off, 0, 0}, Hypothesis{set.gt, 0, 1}};
        const auto ranked = rank_by_inlier_count(hyps, set.cs, 0.1);
        REQUIRE(ranked[0].inlier_count >= ranked[1].inlier_count);
        REQUIRE(rotation_error(ranked[0].transform, set.gt) <= 1e-9);
        REQUIRE(ranked[0].rank == 0);
        REQUIRE(ranked[1].rank == 1);
    }

    SECTION("random lists match a count-and-sort oracle") {
        Rng local(56);
        std::vector<Hypothesis> hyps;
        for (int i = 0; i < 20; ++i) hyps.push_back(Hypothesis{testing::random_transform(local), 0, i});
        const auto ranked = rank_by_inlier_count(hyps, set.cs, 0.1);

        std::vector<int> oracle_counts;
        for (const auto& h : hyps) oracle_counts.push_back(inlier_count(h.transform, set.cs, 0.1));
        std::sort(oracle_counts.begin(), oracle_counts.end(), std::greater<>());
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            REQUIRE(ranked[i].inlier_count == oracle_counts[i]);
            REQUIRE(ranked[i].rank == static_cast<int>(i));
        }
    }
}

TEST_CASE("ranking is idempotent and ties keep their order") {
    Rng rng(57);
    const LabeledSet set = inlier_outlier_set(rng, 8, 20);
    auto hyps = generate_hypotheses(set.cs, 15, 0.1, 0.1, 11);
    const auto once = rank_by_inlier_count(hyps, set.cs, 0.1);
    const auto twice = rank_by_inlier_count(once, set.cs, 0.1);
    REQUIRE(once.size() == twice.size());
    for (std::size_t i = 0; i < once.size(); ++i) {
        REQUIRE((once[i].transform.translation - twice[i].transform.translation).norm() == 0.0);
        REQUIRE(once[i].rank == twice[i].rank);
    }
    for (std::size_t i = 1; i < once.size(); ++i) {
        REQUIRE(once[i - 1].inlier_count >= once[i].inlier_count);
    }
}

TEST_CASE("rank-0 recovers the transform in most seeded trials at 30% inliers") {
    Rng rng(58);
    int good = 0;
    const int trials = 100;
    for (int t = 0; t < trials; ++t) {
        const LabeledSet set = inlier_outlier_set(rng, 15, 35);  // 30% inlier ratio
        const auto hyps = generate_hypotheses(set.cs, 30, 0.1, 0.1, 1000 + t);
        const auto& best = hyps.front().transform;
        if (rotation_error(best, set.gt) < 15.0 && translation_error(best, set.gt) < 0.30) {
            ++good;
        }
    }
    REQUIRE(good >= 95);
}
