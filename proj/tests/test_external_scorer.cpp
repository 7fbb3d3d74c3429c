#include <catch2/catch_amalgamated.hpp>

#include "decreg/external_scorer.hpp"
#include "test_helpers.hpp"

using namespace decreg;

namespace {

const std::string kStub = DECREG_SCORER_STUB_PATH;

TaggedMergedCloud sample_merged(Rng& rng, std::size_t n = 40) {
    PointCloud src = testing::random_cloud(rng, n, 1.0);
    PointCloud tgt = testing::random_cloud(rng, n, 1.0);
    src.viewpoint = Vec3{0, 0, 1.5};
    tgt.viewpoint = Vec3{0.2, 0.1, 1.4};
    return merge_clouds(src, tgt);
}

ScorerModel tiny_model() {
    ScorerModel model;
    model.weights = {1.0, 1.0, -1.0, 0.5, -0.5, -2.0};
    model.bias = 0.25;
    model.feature_means.assign(kFeatureCount, 0.2);
    model.feature_stddevs.assign(kFeatureCount, 0.5);
    return model;
}

}  // namespace

TEST_CASE("merged cloud xyzt round trip") {
    testing::ScratchDir dir("xyzt");
    Rng rng(111);
    const TaggedMergedCloud m = sample_merged(rng);
    const auto path = dir.path() / "m.xyzt";
    save_merged_cloud_xyzt(m, path, /*with_viewpoints=*/true);
    const TaggedMergedCloud back = load_merged_cloud_xyzt(path);
    REQUIRE(back.size() == m.size());
    REQUIRE(back.source_viewpoint.has_value());
    REQUIRE(back.target_viewpoint.has_value());
    for (std::size_t i = 0; i < m.size(); ++i) {
        REQUIRE((back.points[i] - m.points[i]).norm() <= 1e-6);
        REQUIRE(back.tags[i] == m.tags[i]);
    }
}

TEST_CASE("plain xyzt files carry no viewpoints") {
    testing::ScratchDir dir("xyzt_plain");
    Rng rng(112);
    const TaggedMergedCloud m = sample_merged(rng);
    const auto path = dir.path() / "m.xyzt";
    save_merged_cloud_xyzt(m, path);
    const TaggedMergedCloud back = load_merged_cloud_xyzt(path);
    REQUIRE_FALSE(back.source_viewpoint.has_value());
    REQUIRE_FALSE(back.target_viewpoint.has_value());
}

TEST_CASE("external scorer returns the child's fixed reply") {
    ExternalScorer scorer({kStub, "fixed", "0.731"});
    Rng rng(113);
    const TaggedMergedCloud m = sample_merged(rng);
    REQUIRE(scorer.score_merged(m, 1.0) == Catch::Approx(0.731).margin(1e-12));
    // several requests through the same child process
    REQUIRE(scorer.score_merged(m, 0.4) == Catch::Approx(0.731).margin(1e-12));
    REQUIRE(scorer.score_merged(m, 2.5) == Catch::Approx(0.731).margin(1e-12));
}

TEST_CASE("external scorer speaking the model protocol matches the in-process model") {
    testing::ScratchDir dir("ext_model");
    const ScorerModel model = tiny_model();
    const auto model_path = dir.path() / "model.txt";
    save_model(model, model_path);

    ExternalScorer external({kStub, "model", model_path.string()});
    Rng rng(114);
    for (double scale : {0.4, 1.0}) {
        const TaggedMergedCloud m = sample_merged(rng);
        // the exchange format carries points and tags only, so the
        // reference score is computed on a viewpoint-stripped copy; the
        // file also quantizes coordinates to 1e-7, hence the margin
        TaggedMergedCloud transmitted = m;
        transmitted.source_viewpoint.reset();
        transmitted.target_viewpoint.reset();
        const double in_process = score(model, transmitted, scale);
        const double via_child = external.score_merged(m, scale);
        REQUIRE(via_child == Catch::Approx(in_process).margin(1e-4));
    }
}

TEST_CASE("malformed replies raise ExternalScorerError") {
    ExternalScorer scorer({kStub, "malformed"});
    Rng rng(115);
    const TaggedMergedCloud m = sample_merged(rng);
    REQUIRE_THROWS_AS(scorer.score_merged(m, 1.0), ExternalScorerError);
}

TEST_CASE("a dying child raises ExternalScorerError") {
    ExternalScorer scorer({kStub, "die"});
    Rng rng(116);
    const TaggedMergedCloud m = sample_merged(rng);
    REQUIRE_THROWS_AS(scorer.score_merged(m, 1.0), ExternalScorerError);
}

TEST_CASE("a missing executable raises ExternalScorerError") {
    ExternalScorer scorer({"/nonexistent/scorer"});
    Rng rng(117);
    const TaggedMergedCloud m = sample_merged(rng);
    REQUIRE_THROWS_AS(scorer.score_merged(m, 1.0), ExternalScorerError);
}

TEST_CASE("fallback scorer recovers from external failure") {
    const ScorerModel model = tiny_model();
    const ModelScorer internal(model);
    ExternalScorer broken({kStub, "malformed"});
    const FallbackScorer scorer(broken, internal);

    Rng rng(118);
    const TaggedMergedCloud m = sample_merged(rng);
    REQUIRE(scorer.score_merged(m, 1.0) == score(model, m, 1.0));
}

TEST_CASE("fallback scorer prefers the primary when it works") {
    const ScorerModel model = tiny_model();
    const ModelScorer internal(model);
    ExternalScorer fixed({kStub, "fixed", "0.9"});
    const FallbackScorer scorer(fixed, internal);

    Rng rng(119);
    const TaggedMergedCloud m = sample_merged(rng);
    REQUIRE(scorer.score_merged(m, 1.0) == Catch::Approx(0.9).margin(1e-12));
}
