#include <catch2/catch_amalgamated.hpp>

#include "decreg/bench.hpp"
#include "decreg/report.hpp"
#include "test_helpers.hpp"

using namespace decreg;

namespace {

BenchConfig small_bench_config() {
    BenchConfig cfg;
    cfg.scene.points_per_view = 800;
    cfg.scene.overlap_target = 0.5;
    cfg.scene.inlier_ratio = 0.10;
    cfg.scene.correspondence_count = 120;
    cfg.pipeline.k = 40;
    cfg.pipeline.m = 40;
    cfg.pair_count = 12;
    cfg.master_seed = 600;
    return cfg;
}

// one trained model shared by the bench tests
const ScorerModel& bench_model() {
    static const ScorerModel model = [] {
        std::vector<PairRecord> pairs;
        for (int i = 0; i < 8; ++i) {
            SyntheticSceneConfig cfg;
            cfg.points_per_view = 800;
            cfg.overlap_target = 0.3 + 0.05 * i;
            cfg.inlier_ratio = 0.05;
            cfg.correspondence_count = 150;
            cfg.seed = derive_seed(601, i);
            pairs.push_back(generate_scene_pair(cfg, "train_" + std::to_string(i)).first);
        }
        DatasetGenConfig gen;
        gen.hypothesis_count = 50;
        gen.corruptor.correspondence_count = 150;
        const auto records = build_dataset(pairs, gen, 602);
        const auto samples = to_training_samples(records);
        return train_scorer(samples, TrainConfig{});
    }();
    return model;
}

}  // namespace

TEST_CASE("scene generator hits its overlap and inlier-ratio targets") {
    for (double target : {0.2, 0.5, 0.8}) {
        SyntheticSceneConfig cfg;
        cfg.points_per_view = 1000;
        cfg.overlap_target = target;
        cfg.inlier_ratio = 0.10;
        cfg.correspondence_count = 200;
        cfg.seed = 610 + static_cast<std::uint64_t>(target * 100);
        auto [pair, cs] = generate_scene_pair(cfg);

        const double realized = overlap_ratio(pair.source, pair.target, pair.ground_truth, 0.1);
        REQUIRE(std::abs(realized - target) <= 0.05);

        int inliers = 0;
        for (const auto& c : cs.items) {
            if ((pair.ground_truth(c.src) - c.tgt).norm() <= 0.1) ++inliers;
        }
        const double measured = static_cast<double>(inliers) / static_cast<double>(cs.size());
        REQUIRE(std::abs(measured - cfg.inlier_ratio) <= 0.02);
    }
}

TEST_CASE("noiseless all-inlier correspondences recover the ground truth exactly") {
    SyntheticSceneConfig cfg;
    cfg.points_per_view = 600;
    cfg.overlap_target = 0.6;
    cfg.inlier_ratio = 1.0;
    cfg.noise_sigma = 0.0;
    cfg.correspondence_count = 60;
    cfg.seed = 611;
    auto [pair, cs] = generate_scene_pair(cfg);

    Rng rng(612);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Vec3> src, tgt;
        std::set<std::size_t> picked;
        while (picked.size() < 3) picked.insert(rng.uniform_index(cs.size()));
        for (std::size_t i : picked) {
            src.push_back(cs.items[i].src);
            tgt.push_back(cs.items[i].tgt);
        }
        RigidTransform est;
        try {
            est = estimate_rigid(src, tgt);
        } catch (const DegenerateConfiguration&) {
            continue;
        }
        REQUIRE(rotation_error(est, pair.ground_truth) <= 1e-6);
        REQUIRE(translation_error(est, pair.ground_truth) <= 1e-9);
    }
}

TEST_CASE("overlap target one with zero noise duplicates the view") {
    SyntheticSceneConfig cfg;
    cfg.points_per_view = 500;
    cfg.overlap_target = 1.0;
    cfg.noise_sigma = 0.0;
    cfg.inlier_ratio = 0.5;
    cfg.correspondence_count = 50;
    cfg.seed = 613;
    auto [pair, cs] = generate_scene_pair(cfg);
    REQUIRE(pair.source.size() == pair.target.size());
    const PointCloud aligned = apply_transform(pair.ground_truth, pair.source);
    // same underlying points, so the aligned source equals the target as a set
    const KdTree index(pair.target);
    for (const auto& p : aligned.points) {
        REQUIRE(index.nearest_distance(p) <= 1e-9);
    }
}

TEST_CASE("distinct viewpoints are assigned to both views") {
    SyntheticSceneConfig cfg;
    cfg.points_per_view = 500;
    cfg.seed = 614;
    cfg.correspondence_count = 50;
    auto [pair, cs] = generate_scene_pair(cfg);
    REQUIRE(pair.source.viewpoint.has_value());
    REQUIRE(pair.target.viewpoint.has_value());
    const Vec3 source_vp_world = pair.ground_truth(*pair.source.viewpoint);
    REQUIRE((source_vp_world - *pair.target.viewpoint).norm() > 0.01);
}

TEST_CASE("benchmark reports are internally consistent") {
    const BenchConfig cfg = small_bench_config();
    const auto pairs = generate_bench_pairs(cfg);
    REQUIRE(pairs.size() == static_cast<std::size_t>(cfg.pair_count));

    const ModelScorer scorer(bench_model(), cfg.pipeline.feature_config());
    const BenchmarkReport report = run_benchmark(pairs, scorer, cfg, Policy::decision);

    std::size_t successes = 0;
    for (const auto& r : report.pairs) successes += r.success ? 1 : 0;
    REQUIRE(report.rr == Catch::Approx(static_cast<double>(successes) / pairs.size()).margin(1e-12));
    REQUIRE(report.confusion.total() == pairs.size());

    double previous = 0.0;
    for (const auto& [m, rr] : report.top_m_table) {
        REQUIRE(rr >= previous);
        previous = rr;
    }
}

TEST_CASE("paired benchmark upper bound dominates both policies") {
    BenchConfig cfg = small_bench_config();
    cfg.scene.inlier_ratio = 0.05;
    cfg.master_seed = 615;
    const auto pairs = generate_bench_pairs(cfg);
    const ModelScorer scorer(bench_model(), cfg.pipeline.feature_config());
    const PairedBenchmark paired = run_benchmark_paired(pairs, scorer, cfg);

    REQUIRE(paired.upper_bound_rr >= paired.decision.rr);
    REQUIRE(paired.upper_bound_rr >= paired.mic.rr);
    REQUIRE(paired.decision.pairs.size() == paired.mic.pairs.size());
}

TEST_CASE("sweep with a single value reproduces the plain run") {
    BenchConfig cfg = small_bench_config();
    cfg.pipeline.score_threshold = 1.0;  // no truncation: fair comparison
    cfg.pipeline.svc_enabled = false;
    const auto pairs = generate_bench_pairs(cfg);
    const ModelScorer scorer(bench_model(), cfg.pipeline.feature_config());

    const BenchmarkReport plain = run_benchmark(pairs, scorer, cfg, Policy::decision);
    const auto rows = sweep_parameters(SweepAxis::m, {static_cast<double>(cfg.pipeline.m)}, pairs,
                                       scorer, cfg);
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].rr == Catch::Approx(plain.rr).margin(1e-12));
}

TEST_CASE("stratified benchmark produces one paired report per stratum") {
    BenchConfig cfg = small_bench_config();
    cfg.pair_count = 6;
    const ModelScorer scorer(bench_model(), cfg.pipeline.feature_config());
    const auto strata = stratified_benchmark({0.05, 0.20}, 6, scorer, cfg);
    REQUIRE(strata.size() == 2);
    for (const auto& s : strata) {
        REQUIRE(s.paired.decision.pairs.size() == 6);
        REQUIRE(s.paired.upper_bound_rr >= s.paired.decision.rr);
        REQUIRE(s.paired.upper_bound_rr >= s.paired.mic.rr);
    }
}

TEST_CASE("reports serialize byte-identically across thread counts") {
    BenchConfig cfg = small_bench_config();
    cfg.master_seed = 616;

    cfg.threads = 1;
    const auto pairs_single = generate_bench_pairs(cfg);
    const ModelScorer scorer(bench_model(), cfg.pipeline.feature_config());
    const std::string single =
        report_to_json(run_benchmark(pairs_single, scorer, cfg, Policy::decision)).dump(2);

    cfg.threads = 8;
    const auto pairs_threaded = generate_bench_pairs(cfg);
    const std::string threaded =
        report_to_json(run_benchmark(pairs_threaded, scorer, cfg, Policy::decision)).dump(2);

    REQUIRE(single == threaded);
}

TEST_CASE("per-item seeds are decoupled from evaluation order") {
    // pair i's scene depends only on (master seed, i)
    BenchConfig cfg = small_bench_config();
    cfg.pair_count = 4;
    const auto four = generate_bench_pairs(cfg);
    cfg.pair_count = 2;
    const auto two = generate_bench_pairs(cfg);
    for (std::size_t i = 0; i < two.size(); ++i) {
        REQUIRE(two[i].pair.source.size() == four[i].pair.source.size());
        REQUIRE((two[i].pair.source.points[0] - four[i].pair.source.points[0]).norm() == 0.0);
    }
}
