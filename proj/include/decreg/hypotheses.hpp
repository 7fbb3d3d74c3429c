#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <unordered_set>
#include <vector>

#include "decreg/compatibility.hpp"
#include "decreg/correspondence.hpp"
#include "decreg/defaults.hpp"
#include "decreg/metrics.hpp"
#include "decreg/random.hpp"

namespace decreg {

// Recomputes inlier counts under tau_in, then stable-sorts descending.
// Ties keep their prior order; rank fields are rewritten 0..K-1.
inline std::vector<Hypothesis> rank_by_inlier_count(std::vector<Hypothesis> hyps,
                                                    const CorrespondenceSet& cs,
                                                    double tau_in = defaults::kTauIn) {
    if (tau_in <= 0.0) throw Error("rank_by_inlier_count: tau_in must be > 0");
    for (auto& h : hyps) h.inlier_count = inlier_count(h.transform, cs, tau_in);
    std::stable_sort(hyps.begin(), hyps.end(),
                     [](const Hypothesis& a, const Hypothesis& b) {
                         return a.inlier_count > b.inlier_count;
                     });
    for (std::size_t i = 0; i < hyps.size(); ++i) hyps[i].rank = static_cast<int>(i);
    return hyps;
}

// Produces up to k ranked transform hypotheses. Triples of mutually
// first-order-compatible correspondences are sampled with probability
// proportional to their second-order compatibility scores, fitted with
// estimate_rigid, de-duplicated, and ranked by inlier count.
inline std::vector<Hypothesis> generate_hypotheses(const CorrespondenceSet& cs, int k,
                                                   double tau_sc, double tau_in,
                                                   std::uint64_t seed) {
    if (cs.size() < 3) throw InsufficientCorrespondences("generate_hypotheses: need >= 3");
    if (k < 1) throw Error("generate_hypotheses: k must be >= 1");

    const std::size_t n = cs.size();
    const CompatMatrix first = first_order_compat(cs, tau_sc);
    const CompatMatrix second = second_order_compat(first);

    std::vector<double> anchor_weights(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) anchor_weights[i] += second(i, j);
    }

    Rng rng(seed);
    std::unordered_set<std::uint64_t> seen_triples;
    std::vector<Hypothesis> kept;
    kept.reserve(static_cast<std::size_t>(k));

    const long budget = static_cast<long>(defaults::kAttemptBudgetFactor) * k;
    std::vector<std::size_t> candidates;
    std::vector<double> weights;

    for (long attempt = 0; attempt < budget && kept.size() < static_cast<std::size_t>(k);
         ++attempt) {
        const std::size_t a = rng.weighted_index(anchor_weights);

        candidates.clear();
        weights.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (first(a, j)) {
                candidates.push_back(j);
                weights.push_back(static_cast<double>(second(a, j)));
            }
        }
        if (candidates.empty()) continue;
        const std::size_t b = candidates[rng.weighted_index(weights)];

        candidates.clear();
        weights.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != a && j != b && first(a, j) && first(b, j)) {
                candidates.push_back(j);
                weights.push_back(static_cast<double>(second(a, j) + second(b, j)));
            }
        }
        if (candidates.empty()) continue;
        const std::size_t c = candidates[rng.weighted_index(weights)];

        std::array<std::size_t, 3> triple{a, b, c};
        std::sort(triple.begin(), triple.end());
        const std::uint64_t key = (triple[0] * n + triple[1]) * n + triple[2];
        if (!seen_triples.insert(key).second) continue;  // sampled before

        const std::vector<Vec3> src{cs.items[triple[0]].src, cs.items[triple[1]].src,
                                    cs.items[triple[2]].src};
        const std::vector<Vec3> tgt{cs.items[triple[0]].tgt, cs.items[triple[1]].tgt,
                                    cs.items[triple[2]].tgt};
        RigidTransform t;
        try {
            t = estimate_rigid(src, tgt);
        } catch (const DegenerateConfiguration&) {
            continue;
        }

        const bool duplicate = std::any_of(kept.begin(), kept.end(), [&](const Hypothesis& h) {
            return rotation_error(h.transform, t) < defaults::kDedupReDeg &&
                   translation_error(h.transform, t) < defaults::kDedupTe;
        });
        if (duplicate) continue;

        kept.push_back(Hypothesis{t, 0, static_cast<int>(kept.size())});
    }

    if (kept.empty()) {
        throw AllSubsetsDegenerate("generate_hypotheses: no usable triple within attempt budget");
    }
    return rank_by_inlier_count(std::move(kept), cs, tau_in);
}

}  // namespace decreg
