#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "decreg/bench.hpp"
#include "decreg/scoring.hpp"

namespace decreg {

// Insertion order is preserved, so identical runs serialize to identical
// bytes. Wall-clock timing stays out of these documents on purpose; the
// determinism contract covers the full report file.
using Json = nlohmann::ordered_json;

inline Json confusion_to_json(const ConfusionMatrix& cm) {
    Json j;
    j["true_positive"] = cm.true_positive;
    j["false_negative"] = cm.false_negative;
    j["false_positive"] = cm.false_positive;
    j["true_negative"] = cm.true_negative;
    return j;
}

inline Json config_to_json(const BenchConfig& cfg) {
    Json j;
    j["master_seed"] = cfg.master_seed;
    j["pair_count"] = cfg.pair_count;
    j["voxel"] = cfg.voxel;
    Json scene;
    scene["points_per_view"] = cfg.scene.points_per_view;
    scene["overlap_target"] = cfg.scene.overlap_target;
    scene["noise_sigma"] = cfg.scene.noise_sigma;
    scene["inlier_ratio"] = cfg.scene.inlier_ratio;
    scene["correspondence_count"] = cfg.scene.correspondence_count;
    scene["rotation_min_deg"] = cfg.scene.rotation_min_deg;
    scene["rotation_max_deg"] = cfg.scene.rotation_max_deg;
    scene["translation_min"] = cfg.scene.translation_min;
    scene["translation_max"] = cfg.scene.translation_max;
    j["scene"] = scene;
    Json pipe;
    pipe["m"] = cfg.pipeline.m;
    pipe["score_threshold"] = cfg.pipeline.score_threshold;
    pipe["scale"] = cfg.pipeline.scale;
    pipe["svc_enabled"] = cfg.pipeline.svc_enabled;
    pipe["tau_in"] = cfg.pipeline.tau_in;
    pipe["tau_sc"] = cfg.pipeline.tau_sc;
    pipe["tau_ov"] = cfg.pipeline.tau_ov;
    pipe["tau_c"] = cfg.pipeline.tau_c;
    pipe["svc_grid"] = cfg.pipeline.svc_grid;
    pipe["svc_max_violation"] = cfg.pipeline.svc_max_violation;
    pipe["k"] = cfg.pipeline.k;
    j["pipeline"] = pipe;
    Json success;
    success["max_re_deg"] = cfg.success.max_re_deg;
    success["max_te"] = cfg.success.max_te;
    j["success_threshold"] = success;
    return j;
}

inline Json report_to_json(const BenchmarkReport& report) {
    Json j;
    j["schema"] = "decreg_benchmark_report_v1";
    j["policy"] = report.policy;
    j["pair_count"] = report.pairs.size();
    j["rr"] = report.rr;
    auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
    j["mean_re_deg_successes"] = opt(report.mean_re_successes);
    j["mean_te_successes"] = opt(report.mean_te_successes);
    j["median_re_deg_successes"] = opt(report.median_re_successes);
    j["median_te_successes"] = opt(report.median_te_successes);
    j["mean_re_deg_all"] = report.mean_re_all;
    j["mean_te_all"] = report.mean_te_all;
    j["median_re_deg_all"] = report.median_re_all;
    j["median_te_all"] = report.median_te_all;
    Json top_m;
    for (const auto& [m, rr] : report.top_m_table) top_m[std::to_string(m)] = rr;
    j["top_m_rr"] = top_m;
    j["confusion_at_0.5"] = confusion_to_json(report.confusion);
    j["config"] = config_to_json(report.config);
    Json pairs = Json::array();
    for (const auto& r : report.pairs) {
        Json p;
        p["re_deg"] = r.re_deg;
        p["te"] = r.te;
        p["score"] = r.score;
        p["success"] = r.success;
        pairs.push_back(p);
    }
    j["pairs"] = pairs;
    return j;
}

inline Json paired_to_json(const PairedBenchmark& paired) {
    Json j;
    j["schema"] = "decreg_paired_report_v1";
    j["decision"] = report_to_json(paired.decision);
    j["mic"] = report_to_json(paired.mic);
    j["upper_bound_rr"] = paired.upper_bound_rr;
    return j;
}

inline Json strata_to_json(const std::vector<StratumReport>& strata) {
    Json arr = Json::array();
    for (const auto& s : strata) {
        Json j;
        j["inlier_ratio"] = s.inlier_ratio;
        j["decision_rr"] = s.paired.decision.rr;
        j["mic_rr"] = s.paired.mic.rr;
        j["upper_bound_rr"] = s.paired.upper_bound_rr;
        j["detail"] = paired_to_json(s.paired);
        arr.push_back(j);
    }
    Json out;
    out["schema"] = "decreg_stratified_report_v1";
    out["strata"] = arr;
    return out;
}

inline Json accuracy_to_json(const AccuracyReport& report) {
    Json j;
    j["schema"] = "decreg_scorer_eval_v1";
    j["correct_class_accuracy"] = report.correct_class_accuracy;
    j["wrong_class_accuracy"] = report.wrong_class_accuracy;
    j["average_accuracy"] = report.average_accuracy;
    j["confusion"] = confusion_to_json(report.confusion);
    return j;
}

inline void write_json(const Json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

// Plot-ready sweep table, tab separated.
inline std::string sweep_to_tsv(const std::vector<SweepRow>& rows) {
    std::string out = "value\trr\tmean_runtime_seconds\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.9g\t%.9g\t%.9g\n", r.value, r.rr,
                      r.mean_runtime_seconds);
        out += buf;
    }
    return out;
}

}  // namespace decreg
