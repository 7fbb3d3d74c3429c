#pragma once

#include <cstdint>
#include <vector>

#include "decreg/correspondence.hpp"
#include "decreg/defaults.hpp"
#include "decreg/external_scorer.hpp"
#include "decreg/hypotheses.hpp"
#include "decreg/metrics.hpp"
#include "decreg/scoring.hpp"

namespace decreg {

struct PipelineConfig {
    int m = 100;  // cap on SVC-filtered candidates entering the scoring scan
    double score_threshold = defaults::kScoreThreshold;
    double scale = defaults::kScaleIndoor;
    bool svc_enabled = true;
    double tau_in = defaults::kTauIn;
    double tau_sc = defaults::kTauSc;
    double tau_ov = defaults::kTauOv;
    double tau_c = defaults::kTauC;
    double svc_grid = defaults::kSvcGrid;
    double svc_max_violation = defaults::kSvcMaxViolation;
    int k = defaults::kHypothesisCount;
    std::uint64_t seed = 0;

    FeatureConfig feature_config() const {
        FeatureConfig fc;
        fc.tau_ov = tau_ov;
        fc.tau_c = tau_c;
        fc.svc_grid = svc_grid;
        return fc;
    }
};

struct RegistrationOutcome {
    RigidTransform transform;
    double score = 0.0;
    int scanned = 0;          // hypotheses actually scored
    bool truncated = false;   // stopped at the first above-threshold score
    bool svc_bypassed = false;  // SVC rejected everything; scan ran unfiltered
};

enum class Prediction : std::uint8_t { positive, negative };

// Rank-order prefix of hypotheses passing the sight-view constraint, at
// most cfg.m entries. The free-space grid is carved once and reused for
// every hypothesis. Throws when the filter rejects every hypothesis.
inline std::vector<Hypothesis> svc_filter(const PointCloud& p, const PointCloud& q,
                                          const std::vector<Hypothesis>& hyps,
                                          const PipelineConfig& cfg) {
    if (!p.viewpoint || !q.viewpoint) {
        throw MissingViewpoint("svc_filter: both clouds must carry viewpoints");
    }
    const FreeSpaceGrid free_space(q, cfg.svc_grid);
    std::vector<Hypothesis> kept;
    for (const auto& h : hyps) {
        if (static_cast<int>(kept.size()) >= cfg.m) break;
        if (free_space.violation_ratio(p, h.transform) <= cfg.svc_max_violation) {
            kept.push_back(h);
        }
    }
    if (kept.empty()) {
        throw NoHypothesisSurvivedSvc("svc_filter: every hypothesis rejected");
    }
    return kept;
}

// Rank-order scan with early truncation: the first score above the
// threshold wins immediately, otherwise the best score wins with ties
// going to the lower rank (Score* starts at -inf, so an all-equal list
// returns its rank-0 candidate).
inline RegistrationOutcome scan_candidates(const PointCloud& p, const PointCloud& q,
                                           const std::vector<Hypothesis>& candidates,
                                           const Scorer& scorer, double score_threshold,
                                           double scale) {
    if (candidates.empty()) throw Error("scan_candidates: empty candidate list");
    RegistrationOutcome outcome;
    double best_score = -std::numeric_limits<double>::infinity();
    for (const auto& h : candidates) {
        const TaggedMergedCloud merged = merge_clouds(apply_transform(h.transform, p), q);
        const double s = scorer.score_merged(merged, scale);
        ++outcome.scanned;
        if (s > score_threshold) {
            outcome.transform = h.transform;
            outcome.score = s;
            outcome.truncated = true;
            return outcome;
        }
        if (s > best_score) {
            best_score = s;
            outcome.transform = h.transform;
            outcome.score = s;
        }
    }
    return outcome;
}

// Scan-and-truncate evaluation over an already ranked hypothesis list,
// behind the SVC pre-filter.
inline RegistrationOutcome register_with_hypotheses(const PointCloud& p, const PointCloud& q,
                                                    const std::vector<Hypothesis>& hyps,
                                                    const Scorer& scorer,
                                                    const PipelineConfig& cfg) {
    if (hyps.empty()) throw Error("register_with_hypotheses: empty hypothesis list");

    std::vector<Hypothesis> candidates;
    bool svc_bypassed = false;
    const bool can_svc = cfg.svc_enabled && p.viewpoint.has_value() && q.viewpoint.has_value();
    if (can_svc) {
        try {
            candidates = svc_filter(p, q, hyps, cfg);
        } catch (const NoHypothesisSurvivedSvc&) {
            svc_bypassed = true;
        }
    }
    if (candidates.empty()) {
        const std::size_t take = std::min<std::size_t>(hyps.size(), static_cast<std::size_t>(cfg.m));
        candidates.assign(hyps.begin(), hyps.begin() + static_cast<long>(take));
    }

    RegistrationOutcome outcome =
        scan_candidates(p, q, candidates, scorer, cfg.score_threshold, cfg.scale);
    outcome.svc_bypassed = svc_bypassed;
    return outcome;
}

// Full pipeline: generate ranked hypotheses from the correspondences,
// pre-filter with SVC, then scan with early truncation.
inline RegistrationOutcome register_clouds(const PointCloud& p, const PointCloud& q,
                                           const CorrespondenceSet& cs, const Scorer& scorer,
                                           const PipelineConfig& cfg) {
    const auto hyps = generate_hypotheses(cs, cfg.k, cfg.tau_sc, cfg.tau_in, cfg.seed);
    return register_with_hypotheses(p, q, hyps, scorer, cfg);
}

inline RegistrationOutcome register_clouds(const PointCloud& p, const PointCloud& q,
                                           const CorrespondenceSet& cs, const ScorerModel& model,
                                           const PipelineConfig& cfg) {
    const ModelScorer scorer(model, cfg.feature_config());
    return register_clouds(p, q, cs, scorer, cfg);
}

// Boundary is inclusive: a score of exactly the threshold is positive.
inline Prediction classify_outcome(const RegistrationOutcome& o,
                                   double decision_threshold = defaults::kDecisionThreshold) {
    return o.score >= decision_threshold ? Prediction::positive : Prediction::negative;
}

}  // namespace decreg
