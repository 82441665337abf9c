// Command-line front end: `extract` dumps SIFT keypoints of one image,
// `match` scores a probe/gallery pair, `evaluate` runs the full protocol
// from a manifest.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>

#include <siftfuse/config.hpp>
#include <siftfuse/error.hpp>
#include <siftfuse/image.hpp>
#include <siftfuse/landmarks.hpp>
#include <siftfuse/manifest.hpp>
#include <siftfuse/matcher.hpp>
#include <siftfuse/pipeline.hpp>
#include <siftfuse/sift.hpp>

namespace fs = std::filesystem;
using namespace siftfuse;

namespace {

RunConfig load_config_or_default(const std::string& config_path) {
    if (config_path.empty()) return RunConfig{};
    return parse_config(config_path);
}

LandmarkSet landmarks_for_image(const RunConfig& cfg, const fs::path& image_path) {
    if (cfg.landmarks_spec == "default")
        return default_landmarks(kWorkingWidth, kWorkingHeight);
    const auto annotations = load_landmarks(cfg.landmarks_path);
    const auto it = annotations.find(image_path.filename().string());
    if (it != annotations.end()) return it->second;
    const auto by_full = annotations.find(image_path.string());
    if (by_full != annotations.end()) return by_full->second;
    throw MissingFile("no landmark annotation for " + image_path.string());
}

FaceFeatures features_for(const RunConfig& cfg, const fs::path& image_path) {
    const Image raw = load_pgm(image_path);
    return build_face_features(raw, landmarks_for_image(cfg, image_path), cfg);
}

int cmd_extract(const std::string& config_path, const std::string& image,
                std::string output) {
    const RunConfig cfg = load_config_or_default(config_path);
    const auto features = features_for(cfg, image);
    if (output.empty()) output = fs::path(image).filename().string() + ".keypoints.txt";

    std::vector<Keypoint> all;
    for (Region r : kAllRegions)
        all.insert(all.end(), features.regions.of(r).begin(), features.regions.of(r).end());
    write_keypoint_dump(all, output);

    std::cout << "keypoints_total=" << features.raw_keypoints << '\n';
    for (Region r : kAllRegions)
        std::cout << "keypoints_" << region_name(r) << '='
                  << features.regions.of(r).size() << '\n';
    std::cout << "dump=" << output << '\n';
    return 0;
}

FittedFusion fit_for_match(const RunConfig& cfg) {
    FittedFusion fit;
    fit.config.alpha = cfg.fusion_alpha;
    if (cfg.norm_local && cfg.norm_global && cfg.fusion_threshold_psi) {
        fit.local = *cfg.norm_local;
        fit.global = *cfg.norm_global;
        fit.config.threshold_psi = *cfg.fusion_threshold_psi;
        return fit;
    }
    if (cfg.manifest_path.empty())
        throw ConfigError("match needs either explicit normalization stats and "
                          "fusion.threshold_psi, or dataset.manifest with a "
                          "training partition");
    const auto manifest = load_manifest(cfg.manifest_path);
    const auto features = extract_dataset_features(manifest, cfg);
    return fit_fusion(manifest, features, cfg);
}

int cmd_match(const std::string& config_path, const std::string& probe,
              const std::string& gallery) {
    const RunConfig cfg = load_config_or_default(config_path);
    const auto fit = fit_for_match(cfg);

    const auto probe_features = features_for(cfg, probe);
    const auto gallery_features = features_for(cfg, gallery);
    const double local =
        local_match(probe_features.regions, gallery_features.regions, cfg.matching).value;
    const double global = global_match(probe_features.concatenated,
                                       gallery_features.concatenated, cfg.matching).value;
    const auto decision = fuse_and_decide(local, global, fit.local, fit.global, fit.config);

    std::cout << std::fixed << std::setprecision(6);
    std::cout << "local_distance=" << local << '\n';
    std::cout << "global_distance=" << global << '\n';
    std::cout << "fused_m_genuine=" << decision.mass.genuine << '\n';
    std::cout << "fused_m_impostor=" << decision.mass.impostor << '\n';
    std::cout << "fused_m_theta=" << decision.mass.theta << '\n';
    std::cout << "threshold_psi=" << fit.config.threshold_psi << '\n';
    std::cout << "decision=" << (decision.accepted ? "accept" : "reject") << '\n';
    return 0;
}

int cmd_evaluate(const std::string& config_path, const std::string& output,
                 int jobs) {
    RunConfig cfg = load_config_or_default(config_path);
    if (!output.empty()) cfg.output_dir = output;
    if (jobs > 0) cfg.jobs = jobs;
    if (cfg.manifest_path.empty())
        throw ConfigError("evaluate requires dataset.manifest in the config");

    const auto manifest = load_manifest(cfg.manifest_path);
    const auto run = run_evaluation(manifest, cfg);
    write_evaluation_outputs(run, cfg);

    for (const auto& result : run.results) {
        std::cout << matcher_selection_name(result.kind) << ": eer_percent="
                  << std::fixed << std::setprecision(6) << result.report.eer
                  << " rank1_percent=" << result.report.recognition_rate << '\n';
    }
    std::cout << "output_dir=" << cfg.output_dir.string() << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SIFT-based face verification with local/global matching and "
                 "Dempster-Shafer score fusion"};
    app.require_subcommand(1);

    std::string config_path, output;
    int jobs = 0;
    app.add_option("--config", config_path, "flat key-value config file");
    app.add_option("--output", output, "output file (extract) or directory (evaluate)");
    app.add_option("--jobs", jobs, "worker thread count, 0 = all cores");

    std::string image, probe, gallery;
    auto* extract_cmd = app.add_subcommand("extract", "extract keypoints of one image");
    extract_cmd->add_option("image", image, "PGM image path")->required();

    auto* match_cmd = app.add_subcommand("match", "score a probe/gallery image pair");
    match_cmd->add_option("probe", probe, "probe PGM image")->required();
    match_cmd->add_option("gallery", gallery, "gallery PGM image")->required();

    auto* evaluate_cmd = app.add_subcommand("evaluate", "run the evaluation protocol");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(extract_cmd)) return cmd_extract(config_path, image, output);
        if (app.got_subcommand(match_cmd)) return cmd_match(config_path, probe, gallery);
        if (app.got_subcommand(evaluate_cmd)) return cmd_evaluate(config_path, output, jobs);
    } catch (const TotalConflict& e) {
        std::cerr << "error (total conflict): " << e.what() << '\n';
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
