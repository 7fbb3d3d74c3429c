#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "decreg/correspondence.hpp"
#include "decreg/defaults.hpp"
#include "decreg/external_scorer.hpp"
#include "decreg/geometry.hpp"
#include "decreg/hypotheses.hpp"
#include "decreg/metrics.hpp"
#include "decreg/scoring.hpp"

namespace decreg {

// One registration pair with known ground truth. Only pairs with more
// than kMinPairOverlap overlap are admitted into dataset construction.
struct PairRecord {
    PointCloud source;
    PointCloud target;
    RigidTransform ground_truth;
    std::string pair_id;
};

enum class WrongCategory : std::uint8_t {
    correct,  // only for correct-labeled records
    large_overlap,
    small_overlap,
    large_error,
    small_error,
};

inline const char* to_string(WrongCategory c) {
    switch (c) {
        case WrongCategory::correct: return "correct";
        case WrongCategory::large_overlap: return "large-overlap";
        case WrongCategory::small_overlap: return "small-overlap";
        case WrongCategory::large_error: return "large-error";
        case WrongCategory::small_error: return "small-error";
    }
    return "?";
}

inline WrongCategory category_from_string(const std::string& s, std::size_t line_no = 0) {
    if (s == "correct") return WrongCategory::correct;
    if (s == "large-overlap") return WrongCategory::large_overlap;
    if (s == "small-overlap") return WrongCategory::small_overlap;
    if (s == "large-error") return WrongCategory::large_error;
    if (s == "small-error") return WrongCategory::small_error;
    throw ManifestParseError("unknown category '" + s + "'", line_no);
}

struct DatasetRecord {
    TaggedMergedCloud merged;
    Label label = Label::wrong;
    WrongCategory category = WrongCategory::small_error;
    double re_deg = 0.0;
    double te = 0.0;
    double overlap = 0.0;
    std::string pair_id;
};

struct MiningConfig {
    double split_overlap = defaults::kSplitOverlap;
    double split_re_deg = defaults::kSplitReDeg;
    double tau_ov = defaults::kTauOv;
    SuccessThreshold success{};
    int per_category_cap = defaults::kPerCategoryCap;
};

// Scans ranked hypotheses and keeps challenging wrong transforms. Each
// kept transform gets its overlap category; once both overlap buckets
// are full it gets its error category instead. Throws NoWrongCandidates
// when every hypothesis passes the success test.
inline std::vector<std::pair<RigidTransform, WrongCategory>> mine_wrong_transforms(
    const PairRecord& pair, const std::vector<Hypothesis>& hyps, const MiningConfig& cfg) {
    std::map<WrongCategory, int> filled;
    auto bucket_free = [&](WrongCategory c) { return filled[c] < cfg.per_category_cap; };

    const KdTree target_index(pair.target);
    std::vector<std::pair<RigidTransform, WrongCategory>> out;
    for (const auto& h : hyps) {
        if (static_cast<int>(out.size()) >= 4 * cfg.per_category_cap) break;
        if (is_success(h.transform, pair.ground_truth, cfg.success)) continue;

        const double ov = overlap_ratio(pair.source, target_index, h.transform, cfg.tau_ov);
        const WrongCategory overlap_cat = ov >= cfg.split_overlap ? WrongCategory::large_overlap
                                                                  : WrongCategory::small_overlap;
        const double re = rotation_error(h.transform, pair.ground_truth);
        const WrongCategory error_cat =
            re >= cfg.split_re_deg ? WrongCategory::large_error : WrongCategory::small_error;

        WrongCategory chosen;
        if (bucket_free(overlap_cat)) {
            chosen = overlap_cat;
        } else if (!bucket_free(WrongCategory::large_overlap) &&
                   !bucket_free(WrongCategory::small_overlap) && bucket_free(error_cat)) {
            chosen = error_cat;
        } else {
            continue;
        }
        filled[chosen] += 1;
        out.emplace_back(h.transform, chosen);
    }
    if (out.empty()) {
        throw NoWrongCandidates("mine_wrong_transforms: every hypothesis passes the success test");
    }
    return out;
}

// Synthetic correspondence corruptor: true matches drawn from the
// overlap region plus uniformly wrong pairs, hitting a configured inlier
// ratio. A weak descriptor stand-in; its low default ratio is what makes
// the mined negatives hard.
struct CorruptorConfig {
    int correspondence_count = 200;
    double inlier_ratio = 0.05;
    double inlier_noise = 0.005;  // meters, added to the target side
};

inline CorrespondenceSet corrupt_correspondences(const PairRecord& pair,
                                                 const CorruptorConfig& cfg, Rng& rng,
                                                 double tau_in = defaults::kTauIn) {
    if (pair.source.empty() || pair.target.empty()) {
        throw EmptyCloud("corrupt_correspondences: empty cloud");
    }
    const int want_inliers =
        static_cast<int>(std::lround(cfg.inlier_ratio * cfg.correspondence_count));

    const KdTree target_index(pair.target);
    CorrespondenceSet cs;
    cs.provenance = "synthetic";
    cs.items.reserve(static_cast<std::size_t>(cfg.correspondence_count));

    // inliers: source points whose ground-truth image lands on the target
    int made = 0;
    for (int attempt = 0; attempt < 200 * cfg.correspondence_count && made < want_inliers;
         ++attempt) {
        const Vec3& p = pair.source.points[rng.uniform_index(pair.source.size())];
        const Vec3 moved = pair.ground_truth(p);
        const auto [idx, dist] = target_index.nearest(moved);
        if (dist > 0.25 * tau_in) continue;  // outside the overlap region
        Vec3 q = pair.target.points[idx];
        for (int a = 0; a < 3; ++a) q(a) += rng.gaussian(0.0, cfg.inlier_noise);
        if ((pair.ground_truth(p) - q).norm() > 0.9 * tau_in) continue;
        cs.items.push_back(Correspondence{p, q});
        ++made;
    }

    // outliers: random pairings kept clearly outside the inlier gate
    while (cs.items.size() < static_cast<std::size_t>(cfg.correspondence_count)) {
        const Vec3& p = pair.source.points[rng.uniform_index(pair.source.size())];
        const Vec3& q = pair.target.points[rng.uniform_index(pair.target.size())];
        if ((pair.ground_truth(p) - q).norm() <= 2.0 * tau_in) continue;
        cs.items.push_back(Correspondence{p, q});
    }
    return cs;
}

struct DatasetGenConfig {
    double voxel = defaults::kVoxelSize;
    int hypothesis_count = defaults::kHypothesisCount;
    double tau_sc = defaults::kTauSc;
    double tau_in = defaults::kTauIn;
    double min_pair_overlap = defaults::kMinPairOverlap;
    MiningConfig mining{};
    CorruptorConfig corruptor{};
};

// Fig-style dataset pipeline: per pair, downsample, corrupt (or accept
// supplied) correspondences, generate ranked hypotheses, and emit one
// ground-truth-aligned correct record plus the mined wrong records. A
// failing pair is reported through on_skip and never aborts the batch.
inline std::vector<DatasetRecord> build_dataset(
    const std::vector<PairRecord>& pairs, const DatasetGenConfig& cfg, std::uint64_t seed,
    const std::vector<CorrespondenceSet>* supplied_correspondences = nullptr,
    const std::function<void(const std::string&, const std::string&)>& on_skip = {}) {
    if (pairs.empty()) throw Error("build_dataset: no pairs");
    if (supplied_correspondences && supplied_correspondences->size() != pairs.size()) {
        throw Error("build_dataset: correspondence list size mismatch");
    }

    auto skip = [&](const std::string& id, const std::string& why) {
        if (on_skip) on_skip(id, why);
    };

    std::vector<DatasetRecord> records;
    for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
        const PairRecord& raw = pairs[pi];
        try {
            PairRecord pair = raw;
            pair.source = voxel_downsample(raw.source, cfg.voxel);
            pair.target = voxel_downsample(raw.target, cfg.voxel);

            const KdTree target_index(pair.target);
            const double gt_overlap =
                overlap_ratio(pair.source, target_index, pair.ground_truth, cfg.mining.tau_ov);
            if (gt_overlap <= cfg.min_pair_overlap) {
                skip(pair.pair_id, "overlap below admission threshold");
                continue;
            }

            Rng rng(derive_seed(seed, pi));
            CorrespondenceSet cs = supplied_correspondences
                                       ? (*supplied_correspondences)[pi]
                                       : corrupt_correspondences(pair, cfg.corruptor, rng,
                                                                 cfg.tau_in);

            const auto hyps = generate_hypotheses(cs, cfg.hypothesis_count, cfg.tau_sc,
                                                  cfg.tau_in, derive_seed(seed, pi * 2 + 1));

            // the one correct record: the ground-truth alignment
            DatasetRecord correct;
            correct.merged =
                merge_clouds(apply_transform(pair.ground_truth, pair.source), pair.target);
            correct.label = Label::correct;
            correct.category = WrongCategory::correct;
            correct.re_deg = 0.0;
            correct.te = 0.0;
            correct.overlap = gt_overlap;
            correct.pair_id = pair.pair_id;
            records.push_back(std::move(correct));

            try {
                for (const auto& [transform, category] :
                     mine_wrong_transforms(pair, hyps, cfg.mining)) {
                    DatasetRecord rec;
                    rec.merged = merge_clouds(apply_transform(transform, pair.source), pair.target);
                    rec.label = Label::wrong;
                    rec.category = category;
                    rec.re_deg = rotation_error(transform, pair.ground_truth);
                    rec.te = translation_error(transform, pair.ground_truth);
                    rec.overlap =
                        overlap_ratio(pair.source, target_index, transform, cfg.mining.tau_ov);
                    rec.pair_id = pair.pair_id;
                    records.push_back(std::move(rec));
                }
            } catch (const NoWrongCandidates&) {
                // pair contributes only its correct record
            }
        } catch (const Error& e) {
            skip(raw.pair_id, e.what());
        }
    }
    return records;
}

// Pair-id-disjoint train/validation split at the closest achievable
// record fraction. Deterministic given the seed.
inline std::pair<std::vector<DatasetRecord>, std::vector<DatasetRecord>> split_dataset(
    const std::vector<DatasetRecord>& records, double fraction, std::uint64_t seed) {
    if (records.size() < 2) throw TooFewPairs("split_dataset: need >= 2 records");
    if (fraction <= 0.0 || fraction >= 1.0) throw Error("split_dataset: fraction must be in (0,1)");

    std::vector<std::string> pair_ids;
    std::map<std::string, std::size_t> counts;
    for (const auto& r : records) {
        auto [it, inserted] = counts.try_emplace(r.pair_id, 0);
        if (inserted) pair_ids.push_back(r.pair_id);
        it->second += 1;
    }
    if (pair_ids.size() < 2) throw TooFewPairs("split_dataset: need >= 2 distinct pairs");

    Rng rng(seed);
    rng.shuffle(pair_ids);

    // prefix of shuffled pairs whose record count lands closest to target
    const double target = fraction * static_cast<double>(records.size());
    std::size_t best_prefix = 1;
    double best_gap = std::numeric_limits<double>::infinity();
    std::size_t cumulative = 0;
    for (std::size_t i = 0; i + 1 < pair_ids.size(); ++i) {
        cumulative += counts[pair_ids[i]];
        const double gap = std::abs(static_cast<double>(cumulative) - target);
        if (gap < best_gap) {
            best_gap = gap;
            best_prefix = i + 1;
        }
    }

    std::unordered_set<std::string> train_ids(pair_ids.begin(),
                                              pair_ids.begin() + static_cast<long>(best_prefix));
    std::pair<std::vector<DatasetRecord>, std::vector<DatasetRecord>> split;
    for (const auto& r : records) {
        (train_ids.contains(r.pair_id) ? split.first : split.second).push_back(r);
    }
    return split;
}

// ---- persistence: manifest.txt + clouds/<record-id>.xyzt ----

namespace detail {

inline std::string metric_string(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace detail

inline void save_dataset(const std::vector<DatasetRecord>& records,
                         const std::filesystem::path& dir, const MiningConfig& mining = {}) {
    std::filesystem::create_directories(dir / "clouds");
    std::ofstream manifest(dir / "manifest.txt");
    if (!manifest) throw IoError("cannot open for writing: " + (dir / "manifest.txt").string());

    manifest << "format=decreg_dataset_v1\n";
    manifest << "records=" << records.size() << '\n';
    manifest << "split_overlap=" << detail::metric_string(mining.split_overlap) << '\n';
    manifest << "split_re_deg=" << detail::metric_string(mining.split_re_deg) << '\n';
    manifest << "success_max_re_deg=" << detail::metric_string(mining.success.max_re_deg) << '\n';
    manifest << "success_max_te=" << detail::metric_string(mining.success.max_te) << '\n';
    manifest << "tau_ov=" << detail::metric_string(mining.tau_ov) << '\n';
    manifest << "end_header\n";

    std::map<std::string, int> per_pair_counter;
    for (const auto& rec : records) {
        const int serial = per_pair_counter[rec.pair_id]++;
        const std::string record_id = rec.pair_id + "_" + std::to_string(serial);
        const std::string rel_path = "clouds/" + record_id + ".xyzt";
        save_merged_cloud_xyzt(rec.merged, dir / rel_path, /*with_viewpoints=*/true);
        manifest << record_id << '\t' << (rec.label == Label::correct ? "correct" : "wrong")
                 << '\t' << to_string(rec.category) << '\t' << detail::metric_string(rec.re_deg)
                 << '\t' << detail::metric_string(rec.te) << '\t'
                 << detail::metric_string(rec.overlap) << '\t' << rec.pair_id << '\t' << rel_path
                 << '\n';
    }
    if (!manifest) throw IoError("write failed: " + (dir / "manifest.txt").string());
}

inline std::vector<DatasetRecord> load_dataset(const std::filesystem::path& dir) {
    const std::filesystem::path manifest_path = dir / "manifest.txt";
    std::ifstream manifest(manifest_path);
    if (!manifest) throw IoError("cannot open: " + manifest_path.string());

    std::string line;
    std::size_t line_no = 0;
    bool header_done = false;
    while (std::getline(manifest, line)) {
        ++line_no;
        if (line == "end_header") {
            header_done = true;
            break;
        }
        if (line.find('=') == std::string::npos) {
            throw ManifestParseError("expected key=value header line", line_no);
        }
    }
    if (!header_done) throw ManifestParseError("missing end_header", line_no);

    std::vector<DatasetRecord> records;
    while (std::getline(manifest, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string record_id, label, category, re, te, overlap, pair_id, rel_path;
        if (!std::getline(ss, record_id, '\t') || !std::getline(ss, label, '\t') ||
            !std::getline(ss, category, '\t') || !std::getline(ss, re, '\t') ||
            !std::getline(ss, te, '\t') || !std::getline(ss, overlap, '\t') ||
            !std::getline(ss, pair_id, '\t') || !std::getline(ss, rel_path)) {
            throw ManifestParseError("truncated record line", line_no);
        }
        DatasetRecord rec;
        if (label == "correct") rec.label = Label::correct;
        else if (label == "wrong") rec.label = Label::wrong;
        else throw ManifestParseError("unknown label '" + label + "'", line_no);
        rec.category = category_from_string(category, line_no);
        try {
            rec.re_deg = std::stod(re);
            rec.te = std::stod(te);
            rec.overlap = std::stod(overlap);
        } catch (const std::exception&) {
            throw ManifestParseError("bad numeric field", line_no);
        }
        rec.pair_id = pair_id;
        rec.merged = load_merged_cloud_xyzt(dir / rel_path);
        records.push_back(std::move(rec));
    }
    return records;
}

// Feature extraction over a record list, ready for train/evaluate.
inline std::vector<TrainingSample> to_training_samples(const std::vector<DatasetRecord>& records,
                                                       const FeatureConfig& cfg = {},
                                                       bool with_tags = true) {
    std::vector<TrainingSample> samples;
    samples.reserve(records.size());
    for (const auto& r : records) {
        samples.push_back(TrainingSample{extract_features(r.merged, cfg, with_tags), r.label});
    }
    return samples;
}

}  // namespace decreg
