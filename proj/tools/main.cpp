// decreg: decision-scored point cloud registration toolkit.
//
// Subcommands cover the whole workflow: synthesize scene pairs, build
// the classifier dataset, train and evaluate the scorer, register a
// single pair, and run benchmarks and parameter sweeps.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "decreg/decreg.hpp"

namespace fs = std::filesystem;
using namespace decreg;

namespace {

struct GlobalOptions {
    std::uint64_t seed = 0;
    int threads = 1;
    std::string report_path;
};

void add_scene_options(CLI::App* cmd, SyntheticSceneConfig& scene) {
    cmd->add_option("--points", scene.points_per_view, "points per view before downsampling")
        ->capture_default_str();
    cmd->add_option("--overlap", scene.overlap_target, "overlap fraction target in (0,1]")
        ->capture_default_str();
    cmd->add_option("--noise", scene.noise_sigma, "per-axis sensor noise sigma, meters")
        ->capture_default_str();
    cmd->add_option("--inlier-ratio", scene.inlier_ratio, "correspondence inlier ratio (0,1]")
        ->capture_default_str();
    cmd->add_option("--correspondences", scene.correspondence_count,
                    "total correspondences per pair")
        ->capture_default_str();
    cmd->add_option("--rotation-min", scene.rotation_min_deg, "minimum transform rotation, deg")
        ->capture_default_str();
    cmd->add_option("--rotation-max", scene.rotation_max_deg, "maximum transform rotation, deg")
        ->capture_default_str();
    cmd->add_option("--translation-min", scene.translation_min, "minimum translation, meters")
        ->capture_default_str();
    cmd->add_option("--translation-max", scene.translation_max, "maximum translation, meters")
        ->capture_default_str();
}

void add_pipeline_options(CLI::App* cmd, PipelineConfig& pipeline) {
    cmd->add_option("-m,--max-candidates", pipeline.m, "cap on SVC-filtered scored candidates")
        ->capture_default_str();
    cmd->add_option("--score-threshold", pipeline.score_threshold, "early-truncation score")
        ->capture_default_str();
    cmd->add_option("--scale", pipeline.scale, "merged-cloud scale factor before scoring")
        ->capture_default_str();
    cmd->add_flag("--no-svc", [&pipeline](std::int64_t) { pipeline.svc_enabled = false; },
                  "disable the sight-view constraint filter");
    cmd->add_option("--tau-in", pipeline.tau_in, "inlier residual gate, meters")
        ->capture_default_str();
    cmd->add_option("--tau-sc", pipeline.tau_sc, "spatial compatibility gate, meters")
        ->capture_default_str();
    cmd->add_option("--tau-ov", pipeline.tau_ov, "overlap gate, meters")->capture_default_str();
    cmd->add_option("--tau-c", pipeline.tau_c, "chamfer truncation, meters")
        ->capture_default_str();
    cmd->add_option("--svc-grid", pipeline.svc_grid, "free-space grid size, meters")
        ->capture_default_str();
    cmd->add_option("--svc-max-violation", pipeline.svc_max_violation,
                    "free-space violation tolerance")
        ->capture_default_str();
    cmd->add_option("-k,--hypotheses", pipeline.k, "hypotheses generated per pair")
        ->capture_default_str();
}

std::vector<std::string> split_command(const std::string& command) {
    std::vector<std::string> parts;
    std::istringstream ss(command);
    std::string word;
    while (ss >> word) parts.push_back(word);
    return parts;
}

std::string transform_line(const RigidTransform& t) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "%.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g",
                  t.rotation(0, 0), t.rotation(0, 1), t.rotation(0, 2), t.rotation(1, 0),
                  t.rotation(1, 1), t.rotation(1, 2), t.rotation(2, 0), t.rotation(2, 1),
                  t.rotation(2, 2), t.translation.x(), t.translation.y(), t.translation.z());
    return buf;
}

void print_benchmark_summary(const BenchmarkReport& report) {
    std::printf("policy: %s\n", report.policy.c_str());
    std::printf("pairs: %zu\n", report.pairs.size());
    std::printf("rr: %.4f\n", report.rr);
    if (report.mean_re_successes) {
        std::printf("re over successes: mean %.3f deg, median %.3f deg\n",
                    *report.mean_re_successes, *report.median_re_successes);
        std::printf("te over successes: mean %.4f m, median %.4f m\n", *report.mean_te_successes,
                    *report.median_te_successes);
    }
    std::printf("re over all pairs: mean %.3f deg, median %.3f deg\n", report.mean_re_all,
                report.median_re_all);
    std::printf("te over all pairs: mean %.4f m, median %.4f m\n", report.mean_te_all,
                report.median_te_all);
    for (const auto& [m, rr] : report.top_m_table) {
        std::printf("top-%zu rr: %.4f\n", m, rr);
    }
    const auto& cm = report.confusion;
    std::printf("confusion at 0.5 (predicted x actual): tp %zu fn %zu fp %zu tn %zu\n",
                cm.true_positive, cm.false_negative, cm.false_positive, cm.true_negative);
    std::printf("runtime per pair: mean %.4f s, median %.4f s, total %.2f s\n",
                report.runtime.mean_seconds, report.runtime.median_seconds,
                report.runtime.total_seconds);
}

// ---- synth ----

int run_synth(const GlobalOptions& global, const SyntheticSceneConfig& scene_template,
              int pair_count, const std::string& out_dir) {
    fs::create_directories(out_dir);
    for (int i = 0; i < pair_count; ++i) {
        SyntheticSceneConfig scene = scene_template;
        scene.seed = derive_seed(global.seed, static_cast<std::uint64_t>(i));
        char id[32];
        std::snprintf(id, sizeof(id), "pair_%04d", i);
        auto [pair, cs] = generate_scene_pair(scene, id);

        const fs::path base = fs::path(out_dir);
        save_cloud_xyz(pair.source, base / (std::string(id) + "_source.xyz"));
        save_cloud_xyz(pair.target, base / (std::string(id) + "_target.xyz"));
        save_correspondences(cs, base / (std::string(id) + "_corr.txt"));
        std::ofstream gt(base / (std::string(id) + "_gt.txt"));
        gt << transform_line(pair.ground_truth) << '\n';
    }
    std::printf("wrote %d pairs to %s\n", pair_count, out_dir.c_str());
    return 0;
}

// reads the layout run_synth writes
std::vector<PairRecord> load_synth_pairs(const std::string& dir,
                                         std::vector<CorrespondenceSet>* correspondences) {
    std::vector<PairRecord> pairs;
    std::vector<fs::path> sources;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.size() > 11 && name.substr(name.size() - 11) == "_source.xyz") {
            sources.push_back(entry.path());
        }
    }
    std::sort(sources.begin(), sources.end());
    for (const auto& source_path : sources) {
        const std::string id =
            source_path.filename().string().substr(0, source_path.filename().string().size() - 11);
        const fs::path base = source_path.parent_path();
        PairRecord pair;
        pair.pair_id = id;
        pair.source = load_cloud(base / (id + "_source.xyz"));
        pair.target = load_cloud(base / (id + "_target.xyz"));
        const auto gt_list = load_hypotheses(base / (id + "_gt.txt"));
        if (gt_list.empty()) throw IoError("empty ground-truth file for " + id);
        pair.ground_truth = gt_list[0].transform;
        if (correspondences) {
            correspondences->push_back(load_correspondences(base / (id + "_corr.txt")));
        }
        pairs.push_back(std::move(pair));
    }
    if (pairs.empty()) throw IoError("no synth pairs found in " + dir);
    return pairs;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"decision-scored point cloud registration toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions global;
    app.add_option("--seed", global.seed, "master seed")->capture_default_str();
    app.add_option("--threads", global.threads, "worker threads")->capture_default_str();
    app.add_option("--report", global.report_path, "write a machine-readable report here");
    app.set_config("--config", "", "line-oriented key = value config file with sections");

    // --- synth ---
    auto* synth = app.add_subcommand("synth", "generate synthetic scene pairs with ground truth");
    SyntheticSceneConfig synth_scene;
    int synth_pairs = 10;
    std::string synth_out = "synth_out";
    synth->add_option("--pairs", synth_pairs, "number of pairs")->capture_default_str();
    synth->add_option("--out", synth_out, "output directory")->capture_default_str();
    add_scene_options(synth, synth_scene);

    // --- dataset-gen ---
    auto* dataset_gen =
        app.add_subcommand("dataset-gen", "mine a correct/wrong merged-cloud dataset");
    SyntheticSceneConfig dg_scene;
    DatasetGenConfig dg_cfg;
    int dg_pairs = 20;
    std::string dg_out = "dataset_out";
    std::string dg_from;
    double dg_overlap_min = 0.2, dg_overlap_max = 0.7;
    dataset_gen->add_option("--pairs", dg_pairs, "synthetic pairs to generate")
        ->capture_default_str();
    dataset_gen->add_option("--from", dg_from, "load pairs from a synth directory instead");
    dataset_gen->add_option("--out", dg_out, "dataset directory")->capture_default_str();
    dataset_gen->add_option("--voxel", dg_cfg.voxel, "downsampling voxel, meters")
        ->capture_default_str();
    dataset_gen->add_option("--hypotheses", dg_cfg.hypothesis_count, "hypotheses per pair")
        ->capture_default_str();
    dataset_gen->add_option("--per-category-cap", dg_cfg.mining.per_category_cap,
                            "wrong records kept per category")
        ->capture_default_str();
    dataset_gen->add_option("--split-overlap", dg_cfg.mining.split_overlap,
                            "large/small overlap boundary")
        ->capture_default_str();
    dataset_gen->add_option("--split-re", dg_cfg.mining.split_re_deg,
                            "large/small rotation error boundary, deg")
        ->capture_default_str();
    dataset_gen->add_option("--overlap-min", dg_overlap_min, "scene overlap range low end")
        ->capture_default_str();
    dataset_gen->add_option("--overlap-max", dg_overlap_max, "scene overlap range high end")
        ->capture_default_str();
    add_scene_options(dataset_gen, dg_scene);

    // --- train ---
    auto* train = app.add_subcommand("train", "train the merged-cloud scorer");
    std::string train_dataset, train_out = "model.txt";
    TrainConfig train_cfg;
    double train_fraction = defaults::kTrainFraction;
    bool train_no_tags = false;
    train->add_option("--dataset", train_dataset, "dataset directory")->required();
    train->add_option("--out", train_out, "model output file")->capture_default_str();
    train->add_option("--epochs", train_cfg.epochs, "gradient descent epochs")
        ->capture_default_str();
    train->add_option("--learning-rate", train_cfg.learning_rate, "gradient descent step")
        ->capture_default_str();
    train->add_option("--l2", train_cfg.l2, "L2 penalty")->capture_default_str();
    train->add_option("--split", train_fraction, "training record fraction")
        ->capture_default_str();
    train->add_flag("--no-tags", train_no_tags, "ablate point tags (random re-tagging)");

    // --- eval-scorer ---
    auto* eval_scorer = app.add_subcommand("eval-scorer", "validate a trained scorer");
    std::string eval_dataset, eval_model;
    double eval_threshold = defaults::kDecisionThreshold;
    double eval_fraction = defaults::kTrainFraction;
    bool eval_whole = false;
    eval_scorer->add_option("--dataset", eval_dataset, "dataset directory")->required();
    eval_scorer->add_option("--model", eval_model, "model file")->required();
    eval_scorer->add_option("--threshold", eval_threshold, "decision threshold")
        ->capture_default_str();
    eval_scorer->add_option("--split", eval_fraction, "training fraction used at train time")
        ->capture_default_str();
    eval_scorer->add_flag("--whole", eval_whole, "evaluate on the whole dataset, not the split");

    // --- register ---
    auto* reg = app.add_subcommand("register", "register one source/target pair");
    std::string reg_source, reg_target, reg_corr, reg_model, reg_hyps, reg_external;
    PipelineConfig reg_pipeline;
    double reg_voxel = defaults::kVoxelSize;
    reg->add_option("--source", reg_source, "source cloud (.xyz or .ply)")->required();
    reg->add_option("--target", reg_target, "target cloud (.xyz or .ply)")->required();
    reg->add_option("--corr", reg_corr, "correspondence file");
    reg->add_option("--model", reg_model, "scorer model file")->required();
    reg->add_option("--hypotheses-file", reg_hyps,
                    "use an externally supplied ranked hypothesis list");
    reg->add_option("--external-scorer", reg_external,
                    "external scorer command; falls back to the model on failure");
    reg->add_option("--voxel", reg_voxel, "downsampling voxel, meters (0 disables)")
        ->capture_default_str();
    add_pipeline_options(reg, reg_pipeline);

    // --- bench ---
    auto* bench = app.add_subcommand("bench", "benchmark on synthetic pairs");
    BenchConfig bench_cfg;
    std::string bench_model_path, bench_policy = "decision";
    bench->add_option("--pairs", bench_cfg.pair_count, "pair count")->capture_default_str();
    bench->add_option("--model", bench_model_path, "scorer model file")->required();
    bench->add_option("--policy", bench_policy, "decision | mic | paired")
        ->check(CLI::IsMember({"decision", "mic", "paired"}))
        ->capture_default_str();
    bench->add_option("--voxel", bench_cfg.voxel, "downsampling voxel, meters")
        ->capture_default_str();
    add_scene_options(bench, bench_cfg.scene);
    add_pipeline_options(bench, bench_cfg.pipeline);

    // --- sweep ---
    auto* sweep = app.add_subcommand("sweep", "sweep m or the score threshold");
    BenchConfig sweep_cfg;
    std::string sweep_model_path, sweep_axis = "m";
    std::vector<double> sweep_values;
    sweep->add_option("--axis", sweep_axis, "m | score_threshold")
        ->check(CLI::IsMember({"m", "score_threshold"}))
        ->capture_default_str();
    sweep->add_option("--values", sweep_values, "axis values")->required();
    sweep->add_option("--pairs", sweep_cfg.pair_count, "pair count")->capture_default_str();
    sweep->add_option("--model", sweep_model_path, "scorer model file")->required();
    sweep->add_option("--voxel", sweep_cfg.voxel, "downsampling voxel, meters")
        ->capture_default_str();
    add_scene_options(sweep, sweep_cfg.scene);
    add_pipeline_options(sweep, sweep_cfg.pipeline);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (synth->parsed()) {
            return run_synth(global, synth_scene, synth_pairs, synth_out);
        }

        if (dataset_gen->parsed()) {
            std::vector<PairRecord> pairs;
            std::vector<CorrespondenceSet> correspondences;
            bool have_correspondences = false;
            if (!dg_from.empty()) {
                pairs = load_synth_pairs(dg_from, &correspondences);
                have_correspondences = true;
            } else {
                for (int i = 0; i < dg_pairs; ++i) {
                    SyntheticSceneConfig scene = dg_scene;
                    scene.seed = derive_seed(global.seed, 0xda7a + static_cast<std::uint64_t>(i));
                    char id[32];
                    std::snprintf(id, sizeof(id), "pair_%04d", i);
                    // spread overlaps across the configured range
                    const double t = dg_pairs > 1 ? static_cast<double>(i) / (dg_pairs - 1) : 0.5;
                    scene.overlap_target = dg_overlap_min + t * (dg_overlap_max - dg_overlap_min);
                    pairs.push_back(generate_scene_pair(scene, id).first);
                }
            }
            std::size_t skipped = 0;
            const auto records = build_dataset(
                pairs, dg_cfg, global.seed,
                have_correspondences ? &correspondences : nullptr,
                [&skipped](const std::string& id, const std::string& why) {
                    std::fprintf(stderr, "skipping %s: %s\n", id.c_str(), why.c_str());
                    ++skipped;
                });
            save_dataset(records, dg_out, dg_cfg.mining);
            std::size_t correct = 0;
            for (const auto& r : records) correct += r.label == Label::correct ? 1 : 0;
            std::printf("dataset: %zu records (%zu correct, %zu wrong), %zu pairs skipped -> %s\n",
                        records.size(), correct, records.size() - correct, skipped,
                        dg_out.c_str());
            return 0;
        }

        if (train->parsed()) {
            const auto records = load_dataset(train_dataset);
            const auto [train_split, val_split] = split_dataset(records, train_fraction, global.seed);
            train_cfg.with_tags = !train_no_tags;
            train_cfg.seed = global.seed;
            const auto train_samples =
                to_training_samples(train_split, FeatureConfig{}, train_cfg.with_tags);
            const ScorerModel model = train_scorer(train_samples, train_cfg);
            save_model(model, train_out);
            std::printf("trained on %zu records (%zu held out), final loss %.6f -> %s\n",
                        train_split.size(), val_split.size(), model.final_loss,
                        train_out.c_str());
            const auto val_samples =
                to_training_samples(val_split, FeatureConfig{}, train_cfg.with_tags);
            const AccuracyReport report = evaluate_scorer(model, val_samples);
            std::printf("validation: correct %.3f, wrong %.3f, average %.3f\n",
                        report.correct_class_accuracy, report.wrong_class_accuracy,
                        report.average_accuracy);
            return 0;
        }

        if (eval_scorer->parsed()) {
            const auto records = load_dataset(eval_dataset);
            const ScorerModel model = load_model(eval_model);
            std::vector<DatasetRecord> subset;
            if (eval_whole) {
                subset = records;
            } else {
                subset = split_dataset(records, eval_fraction, global.seed).second;
            }
            const auto samples = to_training_samples(subset, FeatureConfig{}, model.with_tags);
            const AccuracyReport report = evaluate_scorer(model, samples, eval_threshold);
            std::printf("validation records: %zu\n", samples.size());
            std::printf("correct-class accuracy: %.4f\n", report.correct_class_accuracy);
            std::printf("wrong-class accuracy:   %.4f\n", report.wrong_class_accuracy);
            std::printf("average accuracy:       %.4f\n", report.average_accuracy);
            const auto& cm = report.confusion;
            std::printf("confusion: tp %zu fn %zu fp %zu tn %zu\n", cm.true_positive,
                        cm.false_negative, cm.false_positive, cm.true_negative);
            if (!global.report_path.empty()) {
                write_json(accuracy_to_json(report), global.report_path);
            }
            return 0;
        }

        if (reg->parsed()) {
            PointCloud source = load_cloud(reg_source);
            PointCloud target = load_cloud(reg_target);
            if (reg_voxel > 0.0) {
                source = voxel_downsample(source, reg_voxel);
                target = voxel_downsample(target, reg_voxel);
            }
            const ScorerModel model = load_model(reg_model);
            reg_pipeline.seed = global.seed;

            const ModelScorer internal(model, reg_pipeline.feature_config());
            std::unique_ptr<ExternalScorer> external;
            std::unique_ptr<FallbackScorer> fallback;
            const Scorer* scorer = &internal;
            if (!reg_external.empty()) {
                external = std::make_unique<ExternalScorer>(split_command(reg_external));
                fallback = std::make_unique<FallbackScorer>(*external, internal);
                scorer = fallback.get();
            }

            RegistrationOutcome outcome;
            if (!reg_hyps.empty()) {
                const auto hyps = load_hypotheses(reg_hyps);
                outcome = register_with_hypotheses(source, target, hyps, *scorer, reg_pipeline);
            } else {
                if (reg_corr.empty()) {
                    throw Error("register: provide --corr or --hypotheses-file");
                }
                const CorrespondenceSet cs = load_correspondences(reg_corr);
                outcome = register_clouds(source, target, cs, *scorer, reg_pipeline);
            }
            std::printf("%s\n", transform_line(outcome.transform).c_str());
            std::printf("score %.17g\n", outcome.score);
            std::printf("scanned %d truncated %d svc_bypassed %d\n", outcome.scanned,
                        outcome.truncated ? 1 : 0, outcome.svc_bypassed ? 1 : 0);
            return 0;
        }

        if (bench->parsed()) {
            bench_cfg.master_seed = global.seed;
            bench_cfg.threads = global.threads;
            const ScorerModel model = load_model(bench_model_path);
            const ModelScorer scorer(model, bench_cfg.pipeline.feature_config());
            const auto pairs = generate_bench_pairs(bench_cfg);

            if (bench_policy == "paired") {
                const PairedBenchmark paired = run_benchmark_paired(pairs, scorer, bench_cfg);
                print_benchmark_summary(paired.decision);
                std::printf("--\n");
                print_benchmark_summary(paired.mic);
                std::printf("--\nupper bound rr: %.4f\n", paired.upper_bound_rr);
                if (!global.report_path.empty()) {
                    write_json(paired_to_json(paired), global.report_path);
                }
            } else {
                const Policy policy =
                    bench_policy == "decision" ? Policy::decision : Policy::mic;
                const BenchmarkReport report = run_benchmark(pairs, scorer, bench_cfg, policy);
                print_benchmark_summary(report);
                if (!global.report_path.empty()) {
                    write_json(report_to_json(report), global.report_path);
                }
            }
            return 0;
        }

        if (sweep->parsed()) {
            sweep_cfg.master_seed = global.seed;
            sweep_cfg.threads = global.threads;
            const ScorerModel model = load_model(sweep_model_path);
            const ModelScorer scorer(model, sweep_cfg.pipeline.feature_config());
            const auto pairs = generate_bench_pairs(sweep_cfg);
            const SweepAxis axis =
                sweep_axis == "m" ? SweepAxis::m : SweepAxis::score_threshold;
            const auto rows = sweep_parameters(axis, sweep_values, pairs, scorer, sweep_cfg);
            const std::string tsv = sweep_to_tsv(rows);
            std::fputs(tsv.c_str(), stdout);
            if (!global.report_path.empty()) {
                std::ofstream out(global.report_path);
                if (!out) throw IoError("cannot open for writing: " + global.report_path);
                out << tsv;
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
