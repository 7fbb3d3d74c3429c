#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "decreg/dataset.hpp"
#include "decreg/defaults.hpp"
#include "decreg/metrics.hpp"
#include "decreg/parallel.hpp"
#include "decreg/pipeline.hpp"
#include "decreg/scoring.hpp"
#include "decreg/synthetic.hpp"

namespace decreg {

enum class Policy { decision, mic };

inline const char* to_string(Policy p) { return p == Policy::decision ? "decision" : "mic"; }

struct BenchPair {
    PairRecord pair;  // clouds already voxel-downsampled
    CorrespondenceSet correspondences;
};

struct BenchConfig {
    SyntheticSceneConfig scene;  // template; per-pair seeds derive from master_seed
    PipelineConfig pipeline;
    SuccessThreshold success{};
    double voxel = defaults::kVoxelSize;
    int pair_count = 200;
    int threads = 1;
    std::uint64_t master_seed = 0;
};

struct RuntimeStats {
    double mean_seconds = 0.0;
    double median_seconds = 0.0;
    double total_seconds = 0.0;
};

struct BenchmarkReport {
    std::string policy;
    std::vector<PairResult> pairs;
    double rr = 0.0;
    // means/medians over successful pairs are absent when nothing succeeded
    std::optional<double> mean_re_successes, mean_te_successes;
    std::optional<double> median_re_successes, median_te_successes;
    double mean_re_all = 0.0, mean_te_all = 0.0;
    double median_re_all = 0.0, median_te_all = 0.0;
    std::vector<std::pair<std::size_t, double>> top_m_table;  // (m, top-m RR)
    ConfusionMatrix confusion;  // predicted correct (score >= 0.5) vs actual success
    RuntimeStats runtime;       // wall clock; kept out of the serialized report
    BenchConfig config;
};

inline const std::vector<std::size_t> kTopMValues = {1, 10, 50, 100};

namespace detail {

// seed streams: keep scene sampling, correspondence corruption and
// hypothesis generation statistically independent per pair
inline std::uint64_t scene_seed(std::uint64_t master, std::size_t i) {
    return derive_seed(derive_seed(master, 0x5ce7e), i);
}
inline std::uint64_t hypgen_seed(std::uint64_t master, std::size_t i) {
    return derive_seed(derive_seed(master, 0x4379), i);
}

inline double median_of(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) return values[mid];
    return 0.5 * (values[mid - 1] + values[mid]);
}

}  // namespace detail

// Builds the synthetic pair set for a run; clouds come back already
// downsampled at cfg.voxel.
inline std::vector<BenchPair> generate_bench_pairs(const BenchConfig& cfg) {
    std::vector<BenchPair> pairs(static_cast<std::size_t>(cfg.pair_count));
    parallel_for(pairs.size(), cfg.threads, [&](std::size_t i) {
        SyntheticSceneConfig scene = cfg.scene;
        scene.seed = detail::scene_seed(cfg.master_seed, i);
        char id[32];
        std::snprintf(id, sizeof(id), "pair_%04zu", i);
        auto [pair, cs] = generate_scene_pair(scene, id);
        pair.source = voxel_downsample(pair.source, cfg.voxel);
        pair.target = voxel_downsample(pair.target, cfg.voxel);
        pairs[i] = BenchPair{std::move(pair), std::move(cs)};
    });
    return pairs;
}

namespace detail {

struct PairEvaluation {
    std::vector<Hypothesis> hyps;
    PairResult decision_result;
    PairResult mic_result;
    double seconds = 0.0;  // hypothesis generation + decision-policy scoring
};

inline PairResult make_result(const RigidTransform& est, double score, const PairRecord& pair,
                              const SuccessThreshold& th) {
    PairResult r;
    r.estimated = est;
    r.ground_truth = pair.ground_truth;
    r.score = score;
    r.re_deg = rotation_error(est, pair.ground_truth);
    r.te = translation_error(est, pair.ground_truth);
    r.success = r.re_deg <= th.max_re_deg && r.te <= th.max_te;
    return r;
}

inline std::vector<PairEvaluation> evaluate_pairs(const std::vector<BenchPair>& pairs,
                                                  const Scorer& scorer, const BenchConfig& cfg,
                                                  bool need_decision, bool need_mic) {
    std::vector<PairEvaluation> evals(pairs.size());
    parallel_for(pairs.size(), cfg.threads, [&](std::size_t i) {
        const BenchPair& bp = pairs[i];
        PairEvaluation& ev = evals[i];
        const auto start = std::chrono::steady_clock::now();

        PipelineConfig pipeline = cfg.pipeline;
        pipeline.seed = hypgen_seed(cfg.master_seed, i);
        try {
            ev.hyps = generate_hypotheses(bp.correspondences, pipeline.k, pipeline.tau_sc,
                                          pipeline.tau_in, pipeline.seed);
        } catch (const Error&) {
            // recorded as a failed pair under either policy
            ev.decision_result = make_result(RigidTransform::identity(), 0.0, bp.pair, cfg.success);
            ev.mic_result = ev.decision_result;
            ev.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            return;
        }

        if (need_decision) {
            const RegistrationOutcome outcome =
                register_with_hypotheses(bp.pair.source, bp.pair.target, ev.hyps, scorer, pipeline);
            ev.decision_result = make_result(outcome.transform, outcome.score, bp.pair, cfg.success);
        }
        ev.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        if (need_mic) {
            const RigidTransform& best = ev.hyps.front().transform;
            const TaggedMergedCloud merged =
                merge_clouds(apply_transform(best, bp.pair.source), bp.pair.target);
            const double mic_score = scorer.score_merged(merged, pipeline.scale);
            ev.mic_result = make_result(best, mic_score, bp.pair, cfg.success);
        }
    });
    return evals;
}

inline BenchmarkReport aggregate(const std::vector<PairEvaluation>& evals,
                                 const std::vector<BenchPair>& pairs, const BenchConfig& cfg,
                                 Policy policy) {
    BenchmarkReport report;
    report.policy = to_string(policy);
    report.config = cfg;

    std::vector<std::pair<std::vector<Hypothesis>, RigidTransform>> per_pair_hyps;
    std::vector<double> re_all, te_all, re_ok, te_ok, seconds;
    for (std::size_t i = 0; i < evals.size(); ++i) {
        const PairResult& r =
            policy == Policy::decision ? evals[i].decision_result : evals[i].mic_result;
        report.pairs.push_back(r);
        re_all.push_back(r.re_deg);
        te_all.push_back(r.te);
        if (r.success) {
            re_ok.push_back(r.re_deg);
            te_ok.push_back(r.te);
        }
        const bool predicted = r.score >= defaults::kDecisionThreshold;
        if (r.success && predicted) ++report.confusion.true_positive;
        if (r.success && !predicted) ++report.confusion.false_negative;
        if (!r.success && predicted) ++report.confusion.false_positive;
        if (!r.success && !predicted) ++report.confusion.true_negative;
        if (!evals[i].hyps.empty()) {
            per_pair_hyps.emplace_back(evals[i].hyps, pairs[i].pair.ground_truth);
        }
        seconds.push_back(evals[i].seconds);
    }

    report.rr = registration_recall(report.pairs);
    auto mean_of = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    report.mean_re_all = mean_of(re_all);
    report.mean_te_all = mean_of(te_all);
    report.median_re_all = median_of(re_all);
    report.median_te_all = median_of(te_all);
    if (!re_ok.empty()) {
        report.mean_re_successes = mean_of(re_ok);
        report.mean_te_successes = mean_of(te_ok);
        report.median_re_successes = median_of(re_ok);
        report.median_te_successes = median_of(te_ok);
    }
    if (!per_pair_hyps.empty()) {
        for (std::size_t m : kTopMValues) {
            report.top_m_table.emplace_back(m, top_m_rr(per_pair_hyps, cfg.success, m));
        }
    }
    report.runtime.total_seconds = 0.0;
    for (double s : seconds) report.runtime.total_seconds += s;
    report.runtime.mean_seconds = report.runtime.total_seconds / static_cast<double>(seconds.size());
    report.runtime.median_seconds = median_of(seconds);
    return report;
}

}  // namespace detail

// Registers every pair under one policy. decision = scan-and-truncate
// over scored candidates; mic = the rank-0 (max inlier count) hypothesis.
inline BenchmarkReport run_benchmark(const std::vector<BenchPair>& pairs, const Scorer& scorer,
                                     const BenchConfig& cfg, Policy policy) {
    if (pairs.empty()) throw EmptyResultSet("run_benchmark: no pairs");
    const auto evals =
        detail::evaluate_pairs(pairs, scorer, cfg, policy == Policy::decision, policy == Policy::mic);
    return detail::aggregate(evals, pairs, cfg, policy);
}

struct PairedBenchmark {
    BenchmarkReport decision;
    BenchmarkReport mic;
    double upper_bound_rr = 0.0;  // top-m RR over the full hypothesis lists
};

// Evaluates both policies on identical hypothesis lists, plus the
// upper bound any selection policy can reach on those lists.
inline PairedBenchmark run_benchmark_paired(const std::vector<BenchPair>& pairs,
                                            const Scorer& scorer, const BenchConfig& cfg) {
    if (pairs.empty()) throw EmptyResultSet("run_benchmark_paired: no pairs");
    const auto evals = detail::evaluate_pairs(pairs, scorer, cfg, true, true);

    PairedBenchmark out;
    out.decision = detail::aggregate(evals, pairs, cfg, Policy::decision);
    out.mic = detail::aggregate(evals, pairs, cfg, Policy::mic);

    std::vector<std::pair<std::vector<Hypothesis>, RigidTransform>> per_pair_hyps;
    for (std::size_t i = 0; i < evals.size(); ++i) {
        per_pair_hyps.emplace_back(evals[i].hyps, pairs[i].pair.ground_truth);
    }
    std::size_t max_k = 1;
    for (const auto& [hyps, gt] : per_pair_hyps) max_k = std::max(max_k, hyps.size());
    out.upper_bound_rr = top_m_rr(per_pair_hyps, cfg.success, max_k);
    return out;
}

struct StratumReport {
    double inlier_ratio = 0.0;
    PairedBenchmark paired;
};

// One paired report per inlier-ratio stratum, on freshly generated pairs.
inline std::vector<StratumReport> stratified_benchmark(const std::vector<double>& inlier_ratios,
                                                       int pairs_per_stratum, const Scorer& scorer,
                                                       const BenchConfig& base) {
    if (inlier_ratios.empty()) throw EmptyResultSet("stratified_benchmark: no strata");
    std::vector<StratumReport> out;
    for (std::size_t s = 0; s < inlier_ratios.size(); ++s) {
        BenchConfig cfg = base;
        cfg.scene.inlier_ratio = inlier_ratios[s];
        cfg.pair_count = pairs_per_stratum;
        cfg.master_seed = derive_seed(base.master_seed, 0xbeef00 + s);
        const auto pairs = generate_bench_pairs(cfg);
        out.push_back(StratumReport{inlier_ratios[s], run_benchmark_paired(pairs, scorer, cfg)});
    }
    return out;
}

// ---- parameter sweeps ----

enum class SweepAxis { m, score_threshold };

struct SweepRow {
    double value = 0.0;
    double rr = 0.0;
    double mean_runtime_seconds = 0.0;  // scoring scan only
};

// Re-runs the scoring scan per axis value. Hypothesis lists and SVC
// survivor prefixes are computed once and reused; scoring is repeated so
// the runtime column reflects real scan cost.
inline std::vector<SweepRow> sweep_parameters(SweepAxis axis, const std::vector<double>& values,
                                              const std::vector<BenchPair>& pairs,
                                              const Scorer& scorer, const BenchConfig& cfg) {
    if (values.empty()) throw EmptyResultSet("sweep_parameters: no axis values");
    if (pairs.empty()) throw EmptyResultSet("sweep_parameters: no pairs");

    int max_m = cfg.pipeline.m;
    if (axis == SweepAxis::m) {
        for (double v : values) max_m = std::max(max_m, static_cast<int>(std::lround(v)));
    }

    struct Cached {
        std::vector<Hypothesis> candidates;  // SVC survivors (or unfiltered prefix)
        bool usable = false;
    };
    std::vector<Cached> cache(pairs.size());
    parallel_for(pairs.size(), cfg.threads, [&](std::size_t i) {
        PipelineConfig pipeline = cfg.pipeline;
        pipeline.seed = detail::hypgen_seed(cfg.master_seed, i);
        pipeline.m = max_m;
        std::vector<Hypothesis> hyps;
        try {
            hyps = generate_hypotheses(pairs[i].correspondences, pipeline.k, pipeline.tau_sc,
                                       pipeline.tau_in, pipeline.seed);
        } catch (const Error&) {
            return;
        }
        const bool can_svc = pipeline.svc_enabled && pairs[i].pair.source.viewpoint &&
                             pairs[i].pair.target.viewpoint;
        if (can_svc) {
            try {
                cache[i].candidates = svc_filter(pairs[i].pair.source, pairs[i].pair.target, hyps,
                                                 pipeline);
            } catch (const NoHypothesisSurvivedSvc&) {
            }
        }
        if (cache[i].candidates.empty()) {
            const std::size_t take =
                std::min<std::size_t>(hyps.size(), static_cast<std::size_t>(max_m));
            cache[i].candidates.assign(hyps.begin(), hyps.begin() + static_cast<long>(take));
        }
        cache[i].usable = true;
    });

    std::vector<SweepRow> rows;
    for (double value : values) {
        const int m = axis == SweepAxis::m ? static_cast<int>(std::lround(value)) : cfg.pipeline.m;
        const double threshold =
            axis == SweepAxis::score_threshold ? value : cfg.pipeline.score_threshold;

        std::vector<PairResult> results(pairs.size());
        std::vector<double> seconds(pairs.size(), 0.0);
        parallel_for(pairs.size(), cfg.threads, [&](std::size_t i) {
            if (!cache[i].usable) {
                results[i] = detail::make_result(RigidTransform::identity(), 0.0, pairs[i].pair,
                                                 cfg.success);
                return;
            }
            const std::size_t take =
                std::min<std::size_t>(cache[i].candidates.size(), static_cast<std::size_t>(m));
            const std::vector<Hypothesis> candidates(cache[i].candidates.begin(),
                                                     cache[i].candidates.begin() +
                                                         static_cast<long>(take));
            const auto start = std::chrono::steady_clock::now();
            const RegistrationOutcome outcome =
                scan_candidates(pairs[i].pair.source, pairs[i].pair.target, candidates, scorer,
                                threshold, cfg.pipeline.scale);
            seconds[i] =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            results[i] = detail::make_result(outcome.transform, outcome.score, pairs[i].pair,
                                             cfg.success);
        });

        SweepRow row;
        row.value = value;
        row.rr = registration_recall(results);
        double total = 0.0;
        for (double s : seconds) total += s;
        row.mean_runtime_seconds = total / static_cast<double>(pairs.size());
        rows.push_back(row);
    }
    return rows;
}

}  // namespace decreg
