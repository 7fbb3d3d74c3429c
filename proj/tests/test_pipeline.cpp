#include <catch2/catch_amalgamated.hpp>

#include "decreg/bench.hpp"
#include "decreg/pipeline.hpp"
#include "decreg/synthetic.hpp"
#include "test_helpers.hpp"

using namespace decreg;

namespace {

// replays a fixed score sequence in scan order
class SequenceScorer final : public Scorer {
public:
    explicit SequenceScorer(std::vector<double> scores) : scores_(std::move(scores)) {}
    double score_merged(const TaggedMergedCloud&, double) const override {
        REQUIRE(next_ < scores_.size());
        return scores_[next_++];
    }
    std::size_t calls() const { return next_; }

private:
    std::vector<double> scores_;
    mutable std::size_t next_ = 0;
};

struct Scene {
    PairRecord pair;
    CorrespondenceSet cs;
    std::vector<Hypothesis> hyps;
};

Scene make_scene(std::uint64_t seed, double inlier_ratio = 0.3, int k = 30) {
    SyntheticSceneConfig cfg;
    cfg.points_per_view = 900;
    cfg.overlap_target = 0.5;
    cfg.inlier_ratio = inlier_ratio;
    cfg.correspondence_count = 120;
    cfg.seed = seed;
    Scene scene;
    auto [pair, cs] = generate_scene_pair(cfg);
    pair.source = voxel_downsample(pair.source, 0.05);
    pair.target = voxel_downsample(pair.target, 0.05);
    scene.pair = std::move(pair);
    scene.cs = std::move(cs);
    scene.hyps = generate_hypotheses(scene.cs, k, 0.1, 0.1, seed + 1);
    return scene;
}

}  // namespace

TEST_CASE("an unreachable threshold reduces to argmax over scanned candidates") {
    const Scene scene = make_scene(501);
    PipelineConfig cfg;
    cfg.score_threshold = 1.0;  // scores live in (0,1): never truncates
    cfg.m = 20;
    cfg.svc_enabled = false;

    Rng rng(502);
    std::vector<double> scores;
    const std::size_t n = std::min<std::size_t>(scene.hyps.size(), 20);
    for (std::size_t i = 0; i < n; ++i) scores.push_back(rng.uniform(0.05, 0.95));

    const SequenceScorer scorer(scores);
    const RegistrationOutcome outcome =
        register_with_hypotheses(scene.pair.source, scene.pair.target, scene.hyps, scorer, cfg);

    std::size_t argmax = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (scores[i] > scores[argmax]) argmax = i;  // strict: ties keep the lower rank
    }
    REQUIRE_FALSE(outcome.truncated);
    REQUIRE(outcome.scanned == static_cast<int>(n));
    REQUIRE(outcome.score == scores[argmax]);
    REQUIRE((outcome.transform.translation - scene.hyps[argmax].transform.translation).norm() ==
            0.0);
}

TEST_CASE("the first above-threshold candidate truncates the scan") {
    const Scene scene = make_scene(503);
    PipelineConfig cfg;
    cfg.score_threshold = 0.6;
    cfg.m = 20;
    cfg.svc_enabled = false;

    SECTION("first candidate crosses") {
        const SequenceScorer scorer(std::vector<double>{0.9, 0.1, 0.1});
        const RegistrationOutcome outcome = register_with_hypotheses(
            scene.pair.source, scene.pair.target, scene.hyps, scorer, cfg);
        REQUIRE(outcome.truncated);
        REQUIRE(outcome.scanned == 1);
        REQUIRE(outcome.score == 0.9);
        REQUIRE((outcome.transform.translation - scene.hyps[0].transform.translation).norm() ==
                0.0);
    }

    SECTION("a later candidate crosses after lower scores") {
        std::vector<double> scores{0.2, 0.5, 0.61, 0.99};
        const SequenceScorer scorer(scores);
        const RegistrationOutcome outcome = register_with_hypotheses(
            scene.pair.source, scene.pair.target, scene.hyps, scorer, cfg);
        REQUIRE(outcome.truncated);
        REQUIRE(outcome.scanned == 3);
        REQUIRE(outcome.score == 0.61);
        REQUIRE(scorer.calls() == 3);  // nothing scored past the truncation point
    }

    SECTION("a score exactly at the threshold does not truncate") {
        const SequenceScorer scorer(std::vector<double>{0.6, 0.3, 0.59});
        PipelineConfig small = cfg;
        small.m = 3;
        const RegistrationOutcome outcome = register_with_hypotheses(
            scene.pair.source, scene.pair.target, scene.hyps, scorer, small);
        REQUIRE_FALSE(outcome.truncated);
        REQUIRE(outcome.scanned == 3);
        REQUIRE(outcome.score == 0.6);
    }
}

TEST_CASE("ties keep the lower rank") {
    const Scene scene = make_scene(504);
    PipelineConfig cfg;
    cfg.score_threshold = 1.0;
    cfg.m = 4;
    cfg.svc_enabled = false;
    const SequenceScorer scorer(std::vector<double>{0.4, 0.7, 0.7, 0.7});
    const RegistrationOutcome outcome =
        register_with_hypotheses(scene.pair.source, scene.pair.target, scene.hyps, scorer, cfg);
    REQUIRE(outcome.score == 0.7);
    REQUIRE((outcome.transform.translation - scene.hyps[1].transform.translation).norm() == 0.0);
}

TEST_CASE("svc rejection of every hypothesis falls back to an unfiltered scan") {
    // wall target seen from the origin; every hypothesis interposes the
    // source halfway, so SVC rejects them all
    PointCloud target;
    for (int y = 0; y < 15; ++y)
        for (int z = 0; z < 15; ++z)
            target.points.emplace_back(2.0, -0.7 + 0.1 * y + 0.013, -0.7 + 0.1 * z + 0.017);
    target.viewpoint = Vec3{0.013, 0.011, 0.017};
    PointCloud source = target;
    source.viewpoint = Vec3{0.4, 0.4, 0.013};

    std::vector<Hypothesis> hyps;
    for (int i = 0; i < 5; ++i) {
        RigidTransform t;
        t.translation = Vec3{-1.0 - 0.01 * i, 0.0, 0.0};
        hyps.push_back(Hypothesis{t, 5 - i, i});
    }

    PipelineConfig cfg;
    cfg.score_threshold = 1.0;
    cfg.m = 5;
    REQUIRE_THROWS_AS(svc_filter(source, target, hyps, cfg), NoHypothesisSurvivedSvc);

    const SequenceScorer scorer(std::vector<double>{0.1, 0.2, 0.3, 0.2, 0.1});
    const RegistrationOutcome outcome =
        register_with_hypotheses(source, target, hyps, scorer, cfg);
    REQUIRE(outcome.svc_bypassed);
    REQUIRE(outcome.scanned == 5);
    REQUIRE(outcome.score == 0.3);
}

TEST_CASE("disabled svc with m >= K degenerates to argmax over all hypotheses") {
    const Scene scene = make_scene(505, 0.3, 12);
    PipelineConfig cfg;
    cfg.score_threshold = 1.0;
    cfg.m = 100;  // larger than K
    cfg.svc_enabled = false;

    Rng rng(506);
    std::vector<double> scores;
    for (std::size_t i = 0; i < scene.hyps.size(); ++i) scores.push_back(rng.uniform01());
    const SequenceScorer scorer(scores);
    const RegistrationOutcome outcome =
        register_with_hypotheses(scene.pair.source, scene.pair.target, scene.hyps, scorer, cfg);

    REQUIRE(outcome.scanned == static_cast<int>(scene.hyps.size()));
    REQUIRE(outcome.score == *std::max_element(scores.begin(), scores.end()));
}

TEST_CASE("register_clouds is deterministic end to end") {
    const Scene scene = make_scene(507, 0.4);
    std::vector<TrainingSample> train;
    Rng rng(508);
    for (int i = 0; i < 40; ++i) {
        TrainingSample pos;
        pos.label = Label::correct;
        pos.features = {rng.uniform(0.5, 1.0), rng.uniform(0.5, 1.0), rng.uniform(0.0, 0.3),
                        rng.uniform(0.3, 1.0), rng.uniform(0.0, 0.1), 0.02};
        train.push_back(pos);
        TrainingSample neg;
        neg.label = Label::wrong;
        neg.features = {rng.uniform(0.0, 0.4), rng.uniform(0.0, 0.4), rng.uniform(0.4, 1.0),
                        rng.uniform(0.0, 0.3), rng.uniform(0.1, 0.3), 0.2};
        train.push_back(neg);
    }
    const ScorerModel model = train_scorer(train, TrainConfig{});

    PipelineConfig cfg;
    cfg.k = 30;
    cfg.m = 30;
    cfg.seed = 11;
    const RegistrationOutcome a =
        register_clouds(scene.pair.source, scene.pair.target, scene.cs, model, cfg);
    const RegistrationOutcome b =
        register_clouds(scene.pair.source, scene.pair.target, scene.cs, model, cfg);
    REQUIRE(a.score == b.score);
    REQUIRE(a.scanned == b.scanned);
    REQUIRE(a.truncated == b.truncated);
    REQUIRE((a.transform.rotation - b.transform.rotation).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((a.transform.translation - b.transform.translation).norm() == 0.0);
}

TEST_CASE("classify_outcome boundary is inclusive") {
    RegistrationOutcome o;
    o.score = 0.5;
    REQUIRE(classify_outcome(o) == Prediction::positive);
    o.score = 0.49;
    REQUIRE(classify_outcome(o) == Prediction::negative);
    o.score = 0.51;
    REQUIRE(classify_outcome(o) == Prediction::positive);
}

TEST_CASE("scanned never exceeds m and truncation implies a crossing score") {
    const Scene scene = make_scene(509);
    PipelineConfig cfg;
    cfg.score_threshold = 0.6;
    cfg.m = 7;
    cfg.svc_enabled = false;
    Rng rng(510);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> scores;
        for (int i = 0; i < 7; ++i) scores.push_back(rng.uniform01());
        const SequenceScorer scorer(scores);
        const RegistrationOutcome outcome = register_with_hypotheses(
            scene.pair.source, scene.pair.target, scene.hyps, scorer, cfg);
        REQUIRE(outcome.scanned <= 7);
        if (outcome.truncated) REQUIRE(outcome.score > cfg.score_threshold);
    }
}
