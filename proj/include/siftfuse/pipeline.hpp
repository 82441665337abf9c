#pragma once

#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

#include "config.hpp"
#include "error.hpp"
#include "evaluation.hpp"
#include "fusion.hpp"
#include "image.hpp"
#include "landmarks.hpp"
#include "manifest.hpp"
#include "matcher.hpp"
#include "sift.hpp"

namespace siftfuse {

// Runs fn(0..n-1) on up to `jobs` threads. Work is strided so every index
// runs exactly once; callers store results by index, which keeps outputs
// independent of the worker count.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
    if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
    if (jobs < 1) jobs = 1;
    const std::size_t workers = std::min<std::size_t>(jobs, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
        threads.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += workers) fn(i);
            } catch (...) {
                std::scoped_lock lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : threads) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

// Extracted features of one face image: the region partition plus the
// concatenated set used by the global matcher.
struct FaceFeatures {
    RegionFeatures regions;
    std::vector<Keypoint> concatenated;
    std::size_t raw_keypoints = 0;
    bool usable = false; // under the configured missing-region policy
};

inline LandmarkSet landmarks_for(const RunConfig& cfg,
                                 const std::map<std::string, LandmarkSet>& annotations,
                                 const std::string& relative_path) {
    if (cfg.landmarks_spec == "default")
        return default_landmarks(kWorkingWidth, kWorkingHeight);
    auto it = annotations.find(relative_path);
    if (it == annotations.end())
        throw MissingFile("no landmark annotation for image " + relative_path);
    return it->second;
}

inline FaceFeatures build_face_features(const Image& raw, const LandmarkSet& landmarks,
                                        const RunConfig& cfg) {
    const Image working = resize(raw, kWorkingWidth, kWorkingHeight);
    const auto keypoints = extract(working, cfg.sift);
    const auto radii = RegionRadii::from_interocular(
        landmarks, cfg.roi_eye_fraction, cfg.roi_nose_fraction, cfg.roi_mouth_fraction);

    FaceFeatures f;
    f.raw_keypoints = keypoints.size();
    f.regions = assign_regions(keypoints, landmarks, radii);
    if (cfg.matching.missing_region == MissingRegionPolicy::strict)
        f.usable = f.regions.all_non_empty();
    else
        f.usable = !f.regions.all_empty();
    if (!f.regions.all_empty()) f.concatenated = concat_features(f.regions);
    return f;
}

struct DatasetFeatures {
    // keyed by manifest-relative path; keeps manifest order for determinism
    std::vector<std::string> paths;
    std::map<std::string, FaceFeatures> by_path;
    std::size_t failed_images = 0;
};

inline DatasetFeatures extract_dataset_features(const DatasetManifest& manifest,
                                                const RunConfig& cfg) {
    std::map<std::string, LandmarkSet> annotations;
    if (cfg.landmarks_spec != "default")
        annotations = load_landmarks(cfg.landmarks_path);

    DatasetFeatures out;
    std::vector<const ImageEntry*> unique_entries;
    for (const auto& s : manifest.subjects)
        for (const auto& e : s.entries)
            if (out.by_path.emplace(e.relative_path, FaceFeatures{}).second) {
                out.paths.push_back(e.relative_path);
                unique_entries.push_back(&e);
            }

    parallel_for(unique_entries.size(), cfg.jobs, [&](std::size_t i) {
        const ImageEntry& e = *unique_entries[i];
        const Image raw = load_pgm(e.resolved_path);
        const LandmarkSet lm = landmarks_for(cfg, annotations, e.relative_path);
        // by_path is fully populated before the parallel section; workers
        // touch disjoint values
        out.by_path.at(e.relative_path) = build_face_features(raw, lm, cfg);
    });

    for (const auto& p : out.paths)
        if (!out.by_path[p].usable) ++out.failed_images;
    return out;
}

// Raw matcher distances for one image pair. `ok` is false when the
// missing-region policy makes the pair unscorable.
struct PairOutcome {
    double local = 0.0;
    double global = 0.0;
    bool ok = false;
};

inline PairOutcome score_pair(const FaceFeatures& probe, const FaceFeatures& gallery,
                              const MatcherOptions& opt) {
    PairOutcome r;
    if (!probe.usable || !gallery.usable) return r;
    try {
        r.local = local_match(probe.regions, gallery.regions, opt).value;
        r.global = global_match(probe.concatenated, gallery.concatenated, opt).value;
        r.ok = true;
    } catch (const MissingRegion&) {
        // skip policy with no region shared by both sides
    } catch (const EmptyFeatureSet&) {
    }
    return r;
}

// ---------------------------------------------------------------------------
// Training fit
// ---------------------------------------------------------------------------

struct FittedFusion {
    NormalizationStats local;
    NormalizationStats global;
    FusionConfig config;
};

struct LabeledImage {
    std::string path;
    std::string subject;
};

inline std::vector<LabeledImage> role_images(const DatasetManifest& manifest, Role role) {
    std::vector<LabeledImage> out;
    for (const auto& s : manifest.subjects)
        for (const auto& e : s.entries)
            if (e.role == role) out.push_back({e.relative_path, s.subject_id});
    return out;
}

// All ordered pairs among the training images (self-pairs excluded),
// scored with both matchers.
struct TrainingScores {
    std::vector<double> local;
    std::vector<double> global;
    std::vector<bool> genuine;
};

inline TrainingScores score_training_pairs(const DatasetManifest& manifest,
                                           const DatasetFeatures& features,
                                           const RunConfig& cfg) {
    const auto train = role_images(manifest, Role::training);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < train.size(); ++i)
        for (std::size_t j = 0; j < train.size(); ++j)
            if (train[i].path != train[j].path) pairs.emplace_back(i, j);

    std::vector<PairOutcome> outcomes(pairs.size());
    parallel_for(pairs.size(), cfg.jobs, [&](std::size_t k) {
        const auto& [i, j] = pairs[k];
        outcomes[k] = score_pair(features.by_path.at(train[i].path),
                                 features.by_path.at(train[j].path), cfg.matching);
    });

    TrainingScores scores;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        if (!outcomes[k].ok) continue;
        const auto& [i, j] = pairs[k];
        scores.local.push_back(outcomes[k].local);
        scores.global.push_back(outcomes[k].global);
        scores.genuine.push_back(train[i].subject == train[j].subject);
    }
    return scores;
}

// Fits min-max normalization on the pooled training scores and, unless an
// explicit threshold was configured, places psi at the EER point of the
// fused training scores.
inline FittedFusion fit_fusion(const DatasetManifest& manifest,
                               const DatasetFeatures& features, const RunConfig& cfg) {
    FittedFusion fit;
    fit.config.alpha = cfg.fusion_alpha;

    TrainingScores scores;
    const bool need_training = !cfg.norm_local || !cfg.norm_global ||
                               (!cfg.fusion_threshold_psi && cfg.fit_threshold_eer);
    if (need_training) {
        if (role_images(manifest, Role::training).empty())
            throw ConfigError("fitting requires a training partition in the manifest");
        scores = score_training_pairs(manifest, features, cfg);
        if (scores.local.size() < 2)
            throw ConfigError("training partition yields fewer than two score pairs");
    }
    fit.local = cfg.norm_local ? *cfg.norm_local : fit_minmax(scores.local);
    fit.global = cfg.norm_global ? *cfg.norm_global : fit_minmax(scores.global);

    if (cfg.fusion_threshold_psi) {
        fit.config.threshold_psi = *cfg.fusion_threshold_psi;
    } else {
        ScoreMatrix fused_train;
        for (std::size_t k = 0; k < scores.local.size(); ++k) {
            const auto d = fuse_and_decide(scores.local[k], scores.global[k], fit.local,
                                           fit.global, fit.config);
            ScoreEntry e;
            e.probe_id = "p" + std::to_string(k);
            e.gallery_id = "g" + std::to_string(k);
            e.subject_probe = "s";
            e.subject_gallery = scores.genuine[k] ? "s" : "other";
            e.score = d.mass.genuine;
            fused_train.entries.push_back(std::move(e));
        }
        EvalReport report;
        try {
            report = compute_eer(fused_train, Polarity::similarity);
        } catch (const DegenerateMatrix&) {
            throw ConfigError("training partition needs both genuine and impostor "
                              "pairs to fit the acceptance threshold");
        }
        fit.config.threshold_psi = report.eer_threshold;
    }
    return fit;
}

// ---------------------------------------------------------------------------
// Score matrices
// ---------------------------------------------------------------------------

struct PairTable {
    std::vector<LabeledImage> probes;
    std::vector<LabeledImage> gallery;
    // one row per scorable (probe, gallery) pair, self-path pairs excluded
    struct Row {
        std::size_t probe_index;
        std::size_t gallery_index;
        double local;
        double global;
    };
    std::vector<Row> rows;
    std::size_t excluded_pairs = 0;
};

inline PairTable score_probe_gallery_pairs(const DatasetManifest& manifest,
                                           const DatasetFeatures& features,
                                           const RunConfig& cfg) {
    PairTable table;
    table.probes = role_images(manifest, Role::probe);
    table.gallery = role_images(manifest, Role::gallery);
    if (table.probes.empty() || table.gallery.empty())
        throw ConfigError("manifest needs non-empty probe and gallery partitions");

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < table.probes.size(); ++i)
        for (std::size_t j = 0; j < table.gallery.size(); ++j)
            if (table.probes[i].path != table.gallery[j].path) pairs.emplace_back(i, j);

    std::vector<PairOutcome> outcomes(pairs.size());
    parallel_for(pairs.size(), cfg.jobs, [&](std::size_t k) {
        const auto& [i, j] = pairs[k];
        outcomes[k] = score_pair(features.by_path.at(table.probes[i].path),
                                 features.by_path.at(table.gallery[j].path), cfg.matching);
    });

    for (std::size_t k = 0; k < pairs.size(); ++k) {
        if (!outcomes[k].ok) {
            ++table.excluded_pairs;
            continue;
        }
        const auto& [i, j] = pairs[k];
        table.rows.push_back(PairTable::Row{i, j, outcomes[k].local, outcomes[k].global});
    }
    return table;
}

// Builds the score matrix for one matcher kind from a scored pair table.
// Local/global matrices carry raw distances; the fused matrix carries the
// combined genuine mass as a similarity.
inline ScoreMatrix matrix_from_pairs(const PairTable& table, MatcherSelection kind,
                                     const FittedFusion* fit) {
    if (kind == MatcherSelection::all)
        throw Error("matrix_from_pairs: pick a single matcher kind");
    if (kind == MatcherSelection::fused && fit == nullptr)
        throw Error("matrix_from_pairs: fused matrix needs fitted normalization");

    ScoreMatrix m;
    m.entries.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        const auto& p = table.probes[row.probe_index];
        const auto& g = table.gallery[row.gallery_index];
        double score = 0.0;
        switch (kind) {
            case MatcherSelection::local: score = row.local; break;
            case MatcherSelection::global: score = row.global; break;
            case MatcherSelection::fused:
                score = fuse_and_decide(row.local, row.global, fit->local, fit->global,
                                        fit->config).mass.genuine;
                break;
            default: break;
        }
        m.entries.push_back(ScoreEntry{p.path, g.path, p.subject, g.subject, score});
    }
    return m;
}

// Spec-level convenience: full pipeline from manifest to one matrix.
inline ScoreMatrix build_score_matrix(const DatasetManifest& manifest,
                                      MatcherSelection kind, const RunConfig& cfg) {
    const auto features = extract_dataset_features(manifest, cfg);
    const auto table = score_probe_gallery_pairs(manifest, features, cfg);
    if (kind == MatcherSelection::fused) {
        const auto fit = fit_fusion(manifest, features, cfg);
        return matrix_from_pairs(table, kind, &fit);
    }
    return matrix_from_pairs(table, kind, nullptr);
}

// ---------------------------------------------------------------------------
// Full evaluation run
// ---------------------------------------------------------------------------

struct MatcherResult {
    MatcherSelection kind;
    EvalReport report;
};

struct EvaluationRun {
    std::vector<MatcherResult> results;
    FittedFusion fit;
    bool fitted = false;
    std::size_t failed_images = 0;
    std::size_t excluded_pairs = 0;
    std::size_t scored_pairs = 0;
};

inline Polarity polarity_of(MatcherSelection kind) {
    return kind == MatcherSelection::fused ? Polarity::similarity : Polarity::distance;
}

inline EvaluationRun run_evaluation(const DatasetManifest& manifest, const RunConfig& cfg) {
    std::vector<MatcherSelection> kinds;
    if (cfg.matcher == MatcherSelection::all)
        kinds = {MatcherSelection::local, MatcherSelection::global, MatcherSelection::fused};
    else
        kinds = {cfg.matcher};

    const bool needs_fit =
        std::find(kinds.begin(), kinds.end(), MatcherSelection::fused) != kinds.end();

    // configuration problems surface before any extraction starts
    if (manifest.entries_with_role(Role::probe).empty() ||
        manifest.entries_with_role(Role::gallery).empty())
        throw ConfigError("manifest needs non-empty probe and gallery partitions");
    const bool fit_needs_training =
        needs_fit && (!cfg.norm_local || !cfg.norm_global ||
                      (!cfg.fusion_threshold_psi && cfg.fit_threshold_eer));
    if (fit_needs_training && manifest.entries_with_role(Role::training).empty())
        throw ConfigError("fused matcher needs a training partition to fit "
                          "normalization and the acceptance threshold");

    const auto features = extract_dataset_features(manifest, cfg);
    EvaluationRun run;
    run.failed_images = features.failed_images;
    if (needs_fit) {
        run.fit = fit_fusion(manifest, features, cfg);
        run.fitted = true;
    }

    const auto table = score_probe_gallery_pairs(manifest, features, cfg);
    run.excluded_pairs = table.excluded_pairs;
    run.scored_pairs = table.rows.size();

    for (MatcherSelection kind : kinds) {
        const auto matrix =
            matrix_from_pairs(table, kind, run.fitted ? &run.fit : nullptr);
        MatcherResult result;
        result.kind = kind;
        result.report = compute_eer(matrix, polarity_of(kind));
        result.report.recognition_rate = recognition_rate(matrix, polarity_of(kind));
        run.results.push_back(std::move(result));
    }
    return run;
}

// Writes ROC CSVs, report summaries and the effective config into
// cfg.output_dir. Outputs are byte-stable across reruns.
inline void write_evaluation_outputs(const EvaluationRun& run, const RunConfig& cfg) {
    std::filesystem::create_directories(cfg.output_dir);
    for (const auto& result : run.results) {
        const std::string name = matcher_selection_name(result.kind);
        emit_roc(result.report, cfg.output_dir / ("roc_" + name + ".csv"));
        std::ofstream rep(cfg.output_dir / ("report_" + name + ".txt"));
        if (!rep)
            throw IoError("cannot write report for matcher " + name);
        rep << "matcher=" << name << '\n'
            << format_report(result.report)
            << "failed_images=" << run.failed_images << '\n'
            << "excluded_pairs=" << run.excluded_pairs << '\n'
            << "scored_pairs=" << run.scored_pairs << '\n';
        if (run.fitted && result.kind == MatcherSelection::fused) {
            rep << std::setprecision(17)
                << "normalization.local_min=" << run.fit.local.min_score << '\n'
                << "normalization.local_max=" << run.fit.local.max_score << '\n'
                << "normalization.global_min=" << run.fit.global.min_score << '\n'
                << "normalization.global_max=" << run.fit.global.max_score << '\n'
                << "fusion.alpha=" << run.fit.config.alpha << '\n'
                << "fusion.threshold_psi=" << run.fit.config.threshold_psi << '\n';
        }
    }
    std::ofstream eff(cfg.output_dir / "effective_config.txt");
    if (!eff)
        throw IoError("cannot write effective config");
    eff << format_effective_config(cfg);
}

} // namespace siftfuse
