#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "decreg/defaults.hpp"
#include "decreg/errors.hpp"
#include "decreg/geometry.hpp"
#include "decreg/kdtree.hpp"
#include "decreg/metrics.hpp"
#include "decreg/random.hpp"

namespace decreg {

enum class PointTag : std::uint8_t { source = 0, target = 1 };

enum class Label : std::uint8_t { correct, wrong };

// Union of the transformed source and the target cloud, every point
// tagged with its origin. This is the scorer's whole input.
struct TaggedMergedCloud {
    std::vector<Vec3> points;
    std::vector<PointTag> tags;  // parallel to points
    std::optional<Vec3> source_viewpoint;
    std::optional<Vec3> target_viewpoint;

    std::size_t size() const { return points.size(); }
};

inline TaggedMergedCloud merge_clouds(const PointCloud& p_prime, const PointCloud& q) {
    if (p_prime.empty() || q.empty()) throw EmptyCloud("merge_clouds: empty input");
    TaggedMergedCloud m;
    m.points.reserve(p_prime.size() + q.size());
    m.tags.reserve(p_prime.size() + q.size());
    for (const auto& p : p_prime.points) {
        m.points.push_back(p);
        m.tags.push_back(PointTag::source);
    }
    for (const auto& p : q.points) {
        m.points.push_back(p);
        m.tags.push_back(PointTag::target);
    }
    m.source_viewpoint = p_prime.viewpoint;
    m.target_viewpoint = q.viewpoint;
    return m;
}

// Splits a merged cloud back into (source part, target part).
inline std::pair<PointCloud, PointCloud> split_by_tag(const TaggedMergedCloud& m) {
    PointCloud source, target;
    for (std::size_t i = 0; i < m.points.size(); ++i) {
        (m.tags[i] == PointTag::source ? source : target).points.push_back(m.points[i]);
    }
    source.viewpoint = m.source_viewpoint;
    target.viewpoint = m.target_viewpoint;
    return {std::move(source), std::move(target)};
}

inline TaggedMergedCloud scale_cloud(const TaggedMergedCloud& m, double scale) {
    TaggedMergedCloud out = m;
    for (auto& p : out.points) p *= scale;
    if (out.source_viewpoint) *out.source_viewpoint *= scale;
    if (out.target_viewpoint) *out.target_viewpoint *= scale;
    return out;
}

inline constexpr std::size_t kFeatureCount = 6;

inline constexpr std::array<const char*, kFeatureCount> kFeatureNames = {
    "overlap_source_to_target",  // fraction of source points near target
    "overlap_target_to_source",  // fraction of target points near source
    "chamfer_truncated_norm",    // truncated chamfer distance / tau_c
    "tag_mixing_ratio",          // points whose k-NN carry both tags
    "median_cross_tag_dist",     // median nearest cross-tag distance, clamped
    "free_space_violation",      // SVC ratio, 0 when viewpoints absent
};

using FeatureVector = std::array<double, kFeatureCount>;

struct FeatureConfig {
    double tau_ov = defaults::kTauOv;
    double tau_c = defaults::kTauC;
    int mixing_neighbors = defaults::kTagMixingNeighbors;
    double svc_grid = defaults::kSvcGrid;
    std::uint64_t retag_seed = 42;  // drives the tag-ablation re-tagging
};

namespace detail {

// The scan loop scores many merged clouds sharing one target side, so
// the target's index and free-space grid are memoized per thread. The
// bytewise key makes a stale hit impossible; results are identical with
// or without the cache.
struct TargetContext {
    std::vector<Vec3> points;
    std::optional<Vec3> viewpoint;
    double grid = 0.0;
    std::unique_ptr<KdTree> tree;
    std::unique_ptr<FreeSpaceGrid> free_space;

    bool matches(const PointCloud& target, double grid_size) const {
        if (!tree || grid != grid_size || points.size() != target.points.size()) return false;
        if (viewpoint.has_value() != target.viewpoint.has_value()) return false;
        if (viewpoint &&
            std::memcmp(viewpoint->data(), target.viewpoint->data(), sizeof(Vec3)) != 0) {
            return false;
        }
        return std::memcmp(points.data(), target.points.data(),
                           points.size() * sizeof(Vec3)) == 0;
    }

    void rebuild(const PointCloud& target, double grid_size) {
        points = target.points;
        viewpoint = target.viewpoint;
        grid = grid_size;
        tree = std::make_unique<KdTree>(target);
        free_space =
            target.viewpoint ? std::make_unique<FreeSpaceGrid>(target, grid_size) : nullptr;
    }
};

inline TargetContext& target_context() {
    thread_local TargetContext context;
    return context;
}

// Exact 50/50 re-tagging used by the tag-ablation mode: feature arity is
// unchanged, the tags just stop carrying information.
inline TaggedMergedCloud random_retag(const TaggedMergedCloud& m, std::uint64_t seed) {
    TaggedMergedCloud out = m;
    const std::size_t n = out.points.size();
    std::vector<PointTag> tags(n, PointTag::target);
    for (std::size_t i = 0; i < n / 2; ++i) tags[i] = PointTag::source;
    Rng rng(seed);
    rng.shuffle(tags);
    out.tags = std::move(tags);
    return out;
}

}  // namespace detail

inline FeatureVector extract_features(const TaggedMergedCloud& merged, const FeatureConfig& cfg,
                                      bool with_tags = true) {
    TaggedMergedCloud retagged;
    const TaggedMergedCloud* cloud = &merged;
    if (!with_tags) {
        retagged = detail::random_retag(merged, cfg.retag_seed);
        cloud = &retagged;
    }

    auto [source, target] = split_by_tag(*cloud);
    if (source.empty() || target.empty()) {
        throw DegenerateCloud("extract_features: all points carry one tag");
    }

    const KdTree source_index(source);
    detail::TargetContext& context = detail::target_context();
    if (!context.matches(target, cfg.svc_grid)) context.rebuild(target, cfg.svc_grid);
    const KdTree& target_index = *context.tree;

    // one pass of nearest cross-tag distances feeds features 0, 1, 2 and 4
    std::vector<double> cross(cloud->size());
    std::size_t src_within = 0, tgt_within = 0;
    double chamfer_fwd = 0.0, chamfer_bwd = 0.0;
    std::size_t idx = 0;
    for (const auto& p : source.points) {
        const double d = target_index.nearest_distance(p);
        cross[idx++] = d;
        if (d <= cfg.tau_ov) ++src_within;
        chamfer_fwd += std::min(d, cfg.tau_c);
    }
    for (const auto& p : target.points) {
        const double d = source_index.nearest_distance(p);
        cross[idx++] = d;
        if (d <= cfg.tau_ov) ++tgt_within;
        chamfer_bwd += std::min(d, cfg.tau_c);
    }
    chamfer_fwd /= static_cast<double>(source.size());
    chamfer_bwd /= static_cast<double>(target.size());

    FeatureVector f{};
    f[0] = static_cast<double>(src_within) / static_cast<double>(source.size());
    f[1] = static_cast<double>(tgt_within) / static_cast<double>(target.size());
    f[2] = std::min(1.0, 0.5 * (chamfer_fwd + chamfer_bwd) / cfg.tau_c);

    // median nearest cross-tag distance, clamped
    std::vector<double> sorted = cross;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    double median = sorted[sorted.size() / 2];
    if (sorted.size() % 2 == 0) {
        const double lower = *std::max_element(sorted.begin(), sorted.begin() + sorted.size() / 2);
        median = 0.5 * (median + lower);
    }
    f[4] = std::min(median, cfg.tau_c);

    // tag mixing: fraction of points whose k nearest neighbors include both tags
    const KdTree merged_index(PointCloud{cloud->points, std::nullopt});
    const std::size_t k = static_cast<std::size_t>(cfg.mixing_neighbors);
    std::size_t mixed = 0;
    for (std::size_t i = 0; i < cloud->points.size(); ++i) {
        auto nn = merged_index.knearest(cloud->points[i], k + 1);
        bool has_src = false, has_tgt = false;
        std::size_t used = 0;
        for (std::size_t j : nn) {
            if (j == i) continue;
            if (used == k) break;
            ++used;
            (cloud->tags[j] == PointTag::source ? has_src : has_tgt) = true;
            if (has_src && has_tgt) break;
        }
        if (has_src && has_tgt) ++mixed;
    }
    f[3] = static_cast<double>(mixed) / static_cast<double>(cloud->points.size());

    // free-space violation of the source part against the target's view
    f[5] = context.free_space
               ? context.free_space->violation_ratio(source, RigidTransform::identity())
               : 0.0;
    return f;
}

// ---- logits and the scorer model ----

struct ScoreLogits {
    double v_t = 0.0;
    double v_f = 0.0;
};

// Softmax probability of the "correct" component, shifted for stability.
inline double logits_to_score(const ScoreLogits& l) {
    if (!std::isfinite(l.v_t) || !std::isfinite(l.v_f)) {
        throw Error("logits_to_score: non-finite logits");
    }
    const double shift = std::max(l.v_t, l.v_f);
    const double e_t = std::exp(l.v_t - shift);
    const double e_f = std::exp(l.v_f - shift);
    return e_t / (e_t + e_f);
}

// Logistic scorer over the hand-crafted features. The internal model
// produces the one-logit parameterization (v_t = w.f + b, v_f = 0);
// two-logit vectors from external scorers flow through logits_to_score
// unchanged.
struct ScorerModel {
    std::vector<double> weights;
    double bias = 0.0;
    std::vector<double> feature_means;
    std::vector<double> feature_stddevs;
    bool with_tags = true;
    std::string config_digest;
    double final_loss = 0.0;
    std::vector<double> loss_history;  // in-memory only, not serialized

    std::size_t arity() const { return weights.size(); }
};

inline double score_features(const ScorerModel& model, const FeatureVector& features) {
    if (model.arity() != kFeatureCount || model.feature_means.size() != kFeatureCount ||
        model.feature_stddevs.size() != kFeatureCount) {
        throw ArityMismatch("score_features: model arity does not match feature count");
    }
    double v_t = model.bias;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        const double z = (features[i] - model.feature_means[i]) / model.feature_stddevs[i];
        v_t += model.weights[i] * z;
    }
    return logits_to_score(ScoreLogits{v_t, 0.0});
}

// Score = F(scale * {P', Q}): coordinates and viewpoints are multiplied
// by the scale factor before feature extraction, so an indoor-trained
// model transfers to other point densities.
inline double score(const ScorerModel& model, const TaggedMergedCloud& merged, double scale = 1.0,
                    const FeatureConfig& cfg = {}) {
    if (scale <= 0.0) throw Error("score: scale must be > 0");
    const TaggedMergedCloud scaled = scale_cloud(merged, scale);
    return score_features(model, extract_features(scaled, cfg, model.with_tags));
}

// ---- training ----

struct TrainingSample {
    FeatureVector features{};
    Label label = Label::wrong;
};

struct TrainConfig {
    double learning_rate = defaults::kLearningRate;
    double l2 = defaults::kL2Penalty;
    int epochs = defaults::kEpochs;
    std::uint64_t seed = 0;
    bool with_tags = true;
};

namespace detail {

inline double softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline std::string train_digest(const TrainConfig& cfg, std::size_t n) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    auto mix = [&](std::uint64_t v) {
        h ^= v;
        h *= 0x100000001B3ULL;
    };
    std::uint64_t lr_bits, l2_bits;
    std::memcpy(&lr_bits, &cfg.learning_rate, 8);
    std::memcpy(&l2_bits, &cfg.l2, 8);
    mix(lr_bits);
    mix(l2_bits);
    mix(static_cast<std::uint64_t>(cfg.epochs));
    mix(cfg.seed);
    mix(cfg.with_tags ? 1 : 0);
    mix(n);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace detail

// Full-batch gradient descent on the L2-penalized logistic loss.
// Weights start at zero, so zero epochs yields the 0.5-everywhere model.
inline ScorerModel train_scorer(const std::vector<TrainingSample>& train,
                                const TrainConfig& cfg = {}) {
    const std::size_t n = train.size();
    std::size_t positives = 0;
    for (const auto& s : train) positives += s.label == Label::correct ? 1 : 0;
    if (n == 0 || positives == 0 || positives == n) {
        throw SingleClassDataset("train_scorer: need both labels in the training split");
    }

    ScorerModel model;
    model.with_tags = cfg.with_tags;
    model.weights.assign(kFeatureCount, 0.0);
    model.feature_means.assign(kFeatureCount, 0.0);
    model.feature_stddevs.assign(kFeatureCount, 1.0);
    model.config_digest = detail::train_digest(cfg, n);

    for (const auto& s : train) {
        for (std::size_t i = 0; i < kFeatureCount; ++i) model.feature_means[i] += s.features[i];
    }
    for (auto& mean : model.feature_means) mean /= static_cast<double>(n);
    std::vector<double> var(kFeatureCount, 0.0);
    for (const auto& s : train) {
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            const double d = s.features[i] - model.feature_means[i];
            var[i] += d * d;
        }
    }
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        const double sd = std::sqrt(var[i] / static_cast<double>(n));
        model.feature_stddevs[i] = sd > 1e-12 ? sd : 1.0;  // constant feature guard
    }

    // standardized design matrix
    std::vector<std::array<double, kFeatureCount>> z(n);
    std::vector<double> y(n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            z[r][i] = (train[r].features[i] - model.feature_means[i]) / model.feature_stddevs[i];
        }
        y[r] = train[r].label == Label::correct ? 1.0 : 0.0;
    }

    std::vector<double>& w = model.weights;
    double& b = model.bias;
    const double inv_n = 1.0 / static_cast<double>(n);
    model.loss_history.reserve(static_cast<std::size_t>(std::max(cfg.epochs, 0)));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::array<double, kFeatureCount> grad_w{};
        double grad_b = 0.0;
        double loss = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            double logit = b;
            for (std::size_t i = 0; i < kFeatureCount; ++i) logit += w[i] * z[r][i];
            const double p = 1.0 / (1.0 + std::exp(-logit));
            const double residual = p - y[r];
            for (std::size_t i = 0; i < kFeatureCount; ++i) grad_w[i] += residual * z[r][i];
            grad_b += residual;
            loss += detail::softplus(logit) - y[r] * logit;
        }
        loss *= inv_n;
        for (std::size_t i = 0; i < kFeatureCount; ++i) loss += 0.5 * cfg.l2 * w[i] * w[i];
        if (!std::isfinite(loss)) throw NonFiniteLoss("train_scorer: loss diverged");
        model.loss_history.push_back(loss);
        model.final_loss = loss;

        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            w[i] -= cfg.learning_rate * (grad_w[i] * inv_n + cfg.l2 * w[i]);
        }
        b -= cfg.learning_rate * grad_b * inv_n;
    }
    return model;
}

// ---- validation ----

struct ConfusionMatrix {
    std::size_t true_positive = 0;   // actual correct, predicted correct
    std::size_t false_negative = 0;  // actual correct, predicted wrong
    std::size_t false_positive = 0;  // actual wrong, predicted correct
    std::size_t true_negative = 0;   // actual wrong, predicted wrong

    std::size_t total() const {
        return true_positive + false_negative + false_positive + true_negative;
    }
};

struct AccuracyReport {
    double correct_class_accuracy = 0.0;
    double wrong_class_accuracy = 0.0;
    double average_accuracy = 0.0;  // weighted by class sizes
    ConfusionMatrix confusion;
};

inline AccuracyReport evaluate_scorer(const ScorerModel& model,
                                      const std::vector<TrainingSample>& val,
                                      double decision_threshold = defaults::kDecisionThreshold) {
    std::size_t positives = 0;
    for (const auto& s : val) positives += s.label == Label::correct ? 1 : 0;
    if (val.empty() || positives == 0 || positives == val.size()) {
        throw SingleClassDataset("evaluate_scorer: need both labels in the validation split");
    }

    AccuracyReport report;
    for (const auto& s : val) {
        const bool predicted_correct = score_features(model, s.features) >= decision_threshold;
        const bool actual_correct = s.label == Label::correct;
        if (actual_correct && predicted_correct) ++report.confusion.true_positive;
        if (actual_correct && !predicted_correct) ++report.confusion.false_negative;
        if (!actual_correct && predicted_correct) ++report.confusion.false_positive;
        if (!actual_correct && !predicted_correct) ++report.confusion.true_negative;
    }
    const auto& cm = report.confusion;
    report.correct_class_accuracy =
        static_cast<double>(cm.true_positive) / static_cast<double>(positives);
    report.wrong_class_accuracy =
        static_cast<double>(cm.true_negative) / static_cast<double>(val.size() - positives);
    report.average_accuracy =
        static_cast<double>(cm.true_positive + cm.true_negative) / static_cast<double>(val.size());
    return report;
}

// ---- model file: ASCII header + decimal weights, one value per line ----

inline void save_model(const ScorerModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    out << "decreg_scorer_model 1\n";
    out << "arity " << model.arity() << '\n';
    out << "with_tags " << (model.with_tags ? 1 : 0) << '\n';
    if (!model.config_digest.empty()) out << "digest " << model.config_digest << '\n';
    out << "final_loss " << num(model.final_loss) << '\n';
    out << "bias " << num(model.bias) << '\n';
    for (double w : model.weights) out << "weight " << num(w) << '\n';
    for (double m : model.feature_means) out << "mean " << num(m) << '\n';
    for (double s : model.feature_stddevs) out << "stddev " << num(s) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

inline ScorerModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());
    std::string header;
    if (!std::getline(in, header) || header != "decreg_scorer_model 1") {
        throw IoError(path.string() + ": not a scorer model file");
    }
    ScorerModel model;
    std::size_t arity = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "arity") {
            ss >> arity;
        } else if (key == "with_tags") {
            int v = 0;
            ss >> v;
            model.with_tags = v != 0;
        } else if (key == "digest") {
            ss >> model.config_digest;
        } else if (key == "final_loss") {
            ss >> model.final_loss;
        } else if (key == "bias") {
            ss >> model.bias;
        } else if (key == "weight") {
            double v;
            ss >> v;
            model.weights.push_back(v);
        } else if (key == "mean") {
            double v;
            ss >> v;
            model.feature_means.push_back(v);
        } else if (key == "stddev") {
            double v;
            ss >> v;
            model.feature_stddevs.push_back(v);
        } else {
            throw IoError(path.string() + ": unknown model key " + key);
        }
        if (ss.fail()) throw IoError(path.string() + ": malformed value after " + key);
    }
    if (model.weights.size() != arity || model.feature_means.size() != arity ||
        model.feature_stddevs.size() != arity) {
        throw IoError(path.string() + ": arity mismatch in model file");
    }
    for (double s : model.feature_stddevs) {
        if (s <= 0.0) throw IoError(path.string() + ": non-positive stddev");
    }
    return model;
}

}  // namespace decreg
