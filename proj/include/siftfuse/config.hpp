#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "error.hpp"
#include "fusion.hpp"
#include "matcher.hpp"
#include "sift.hpp"

namespace siftfuse {

enum class MatcherSelection { local, global, fused, all };

inline const char* matcher_selection_name(MatcherSelection m) {
    switch (m) {
        case MatcherSelection::local: return "local";
        case MatcherSelection::global: return "global";
        case MatcherSelection::fused: return "fused";
        case MatcherSelection::all: return "all";
    }
    return "?";
}

// Effective run configuration. File format is flat `section.key = value`
// lines; '#' starts a comment. Relative paths resolve against the config
// file's directory.
struct RunConfig {
    std::filesystem::path manifest_path;         // empty = not set
    std::string landmarks_spec = "default";      // "default" or a path
    std::filesystem::path landmarks_path;        // resolved when not "default"
    SiftParams sift;
    double roi_eye_fraction = 0.35;
    double roi_nose_fraction = 0.35;
    double roi_mouth_fraction = 0.50;
    MatcherOptions matching;
    double fusion_alpha = 0.9;
    std::optional<double> fusion_threshold_psi;  // absent = fit on training
    bool fit_threshold_eer = true;
    std::optional<NormalizationStats> norm_local;
    std::optional<NormalizationStats> norm_global;
    std::filesystem::path output_dir = "out";
    MatcherSelection matcher = MatcherSelection::all;
    int jobs = 0; // 0 = hardware concurrency
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config: " + key + " expects a number, got '" + value + "'");
    }
    if (pos != value.size())
        throw ConfigError("config: " + key + " expects a number, got '" + value + "'");
    return v;
}

inline int to_int(const std::string& key, const std::string& value) {
    const double v = to_double(key, value);
    const int i = static_cast<int>(v);
    if (v != i)
        throw ConfigError("config: " + key + " expects an integer, got '" + value + "'");
    return i;
}

} // namespace detail

inline RunConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file: " + path.string());
    const std::filesystem::path base = path.has_parent_path()
                                           ? path.parent_path()
                                           : std::filesystem::path(".");

    RunConfig cfg;
    std::optional<NormalizationStats> norm_local, norm_global;
    double nl_min = 0, nl_max = 0, ng_min = 0, ng_max = 0;
    bool has_nl_min = false, has_nl_max = false, has_ng_min = false, has_ng_max = false;

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string stripped = detail::trim(line);
        if (stripped.empty()) continue;

        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: expected `key = value` at line " +
                              std::to_string(lineno));
        const std::string key = detail::trim(stripped.substr(0, eq));
        const std::string value = detail::trim(stripped.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("config: empty key or value at line " +
                              std::to_string(lineno));

        if (key == "dataset.manifest") {
            cfg.manifest_path = base / value;
        } else if (key == "dataset.landmarks") {
            cfg.landmarks_spec = value;
            if (value != "default") cfg.landmarks_path = base / value;
        } else if (key == "sift.octaves") {
            cfg.sift.octaves = detail::to_int(key, value);
        } else if (key == "sift.scales_per_octave") {
            cfg.sift.scales_per_octave = detail::to_int(key, value);
        } else if (key == "sift.base_sigma") {
            cfg.sift.base_sigma = detail::to_double(key, value);
        } else if (key == "sift.contrast_threshold") {
            cfg.sift.contrast_threshold = detail::to_double(key, value);
        } else if (key == "sift.edge_ratio_threshold") {
            cfg.sift.edge_ratio_threshold = detail::to_double(key, value);
        } else if (key == "sift.orientation_bins") {
            cfg.sift.orientation_bins = detail::to_int(key, value);
        } else if (key == "roi.eye_fraction") {
            cfg.roi_eye_fraction = detail::to_double(key, value);
        } else if (key == "roi.nose_fraction") {
            cfg.roi_nose_fraction = detail::to_double(key, value);
        } else if (key == "roi.mouth_fraction") {
            cfg.roi_mouth_fraction = detail::to_double(key, value);
        } else if (key == "matching.missing_region") {
            if (value == "strict") cfg.matching.missing_region = MissingRegionPolicy::strict;
            else if (value == "skip") cfg.matching.missing_region = MissingRegionPolicy::skip;
            else throw ConfigError("config: matching.missing_region must be strict or skip");
        } else if (key == "matching.ratio_test") {
            if (value == "on") cfg.matching.ratio_test = true;
            else if (value == "off") cfg.matching.ratio_test = false;
            else throw ConfigError("config: matching.ratio_test must be on or off");
        } else if (key == "matching.ratio_threshold") {
            cfg.matching.ratio_threshold = detail::to_double(key, value);
        } else if (key == "fusion.alpha") {
            cfg.fusion_alpha = detail::to_double(key, value);
        } else if (key == "fusion.threshold_psi") {
            cfg.fusion_threshold_psi = detail::to_double(key, value);
            cfg.fit_threshold_eer = false;
        } else if (key == "fusion.fit_threshold") {
            if (value != "eer")
                throw ConfigError("config: fusion.fit_threshold only supports eer");
            cfg.fit_threshold_eer = true;
        } else if (key == "normalization.source") {
            if (value != "training")
                throw ConfigError("config: normalization.source only supports training");
        } else if (key == "normalization.local_min") {
            nl_min = detail::to_double(key, value); has_nl_min = true;
        } else if (key == "normalization.local_max") {
            nl_max = detail::to_double(key, value); has_nl_max = true;
        } else if (key == "normalization.global_min") {
            ng_min = detail::to_double(key, value); has_ng_min = true;
        } else if (key == "normalization.global_max") {
            ng_max = detail::to_double(key, value); has_ng_max = true;
        } else if (key == "output.dir") {
            cfg.output_dir = base / value;
        } else if (key == "matcher") {
            if (value == "local") cfg.matcher = MatcherSelection::local;
            else if (value == "global") cfg.matcher = MatcherSelection::global;
            else if (value == "fused") cfg.matcher = MatcherSelection::fused;
            else if (value == "all") cfg.matcher = MatcherSelection::all;
            else throw ConfigError("config: matcher must be local, global, fused or all");
        } else if (key == "jobs") {
            cfg.jobs = detail::to_int(key, value);
        } else {
            throw ConfigError("config: unknown key '" + key + "' at line " +
                              std::to_string(lineno));
        }
    }

    if (has_nl_min != has_nl_max || has_ng_min != has_ng_max)
        throw ConfigError("config: normalization min/max must be given together");
    if (has_nl_min) {
        if (!(nl_max > nl_min))
            throw ConfigError("config: normalization.local range is degenerate");
        cfg.norm_local = NormalizationStats{nl_min, nl_max};
    }
    if (has_ng_min) {
        if (!(ng_max > ng_min))
            throw ConfigError("config: normalization.global range is degenerate");
        cfg.norm_global = NormalizationStats{ng_min, ng_max};
    }

    // range checks
    if (cfg.sift.octaves < 1 || cfg.sift.scales_per_octave < 1 ||
        cfg.sift.base_sigma <= 0.0 || cfg.sift.orientation_bins < 2)
        throw ConfigError("config: sift.* values out of range");
    if (cfg.sift.contrast_threshold < 0.0 || cfg.sift.edge_ratio_threshold <= 0.0)
        throw ConfigError("config: sift.* thresholds out of range");
    if (cfg.roi_eye_fraction <= 0.0 || cfg.roi_nose_fraction <= 0.0 ||
        cfg.roi_mouth_fraction <= 0.0)
        throw ConfigError("config: roi.* fractions must be positive");
    if (!(cfg.fusion_alpha > 0.0 && cfg.fusion_alpha <= 1.0))
        throw ConfigError("config: fusion.alpha must be in (0,1]");
    if (cfg.fusion_threshold_psi &&
        !(*cfg.fusion_threshold_psi >= 0.0 && *cfg.fusion_threshold_psi <= 1.0))
        throw ConfigError("config: fusion.threshold_psi must be in [0,1]");
    if (cfg.jobs < 0)
        throw ConfigError("config: jobs must be >= 0");
    return cfg;
}

// Deterministic dump of the effective configuration (defaults + overrides).
inline std::string format_effective_config(const RunConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    if (!cfg.manifest_path.empty())
        out << "dataset.manifest = " << cfg.manifest_path.string() << '\n';
    out << "dataset.landmarks = " << cfg.landmarks_spec << '\n';
    out << "sift.octaves = " << cfg.sift.octaves << '\n';
    out << "sift.scales_per_octave = " << cfg.sift.scales_per_octave << '\n';
    out << "sift.base_sigma = " << cfg.sift.base_sigma << '\n';
    out << "sift.contrast_threshold = " << cfg.sift.contrast_threshold << '\n';
    out << "sift.edge_ratio_threshold = " << cfg.sift.edge_ratio_threshold << '\n';
    out << "sift.orientation_bins = " << cfg.sift.orientation_bins << '\n';
    out << "roi.eye_fraction = " << cfg.roi_eye_fraction << '\n';
    out << "roi.nose_fraction = " << cfg.roi_nose_fraction << '\n';
    out << "roi.mouth_fraction = " << cfg.roi_mouth_fraction << '\n';
    out << "matching.missing_region = "
        << (cfg.matching.missing_region == MissingRegionPolicy::strict ? "strict" : "skip") << '\n';
    out << "matching.ratio_test = " << (cfg.matching.ratio_test ? "on" : "off") << '\n';
    out << "matching.ratio_threshold = " << cfg.matching.ratio_threshold << '\n';
    out << "fusion.alpha = " << cfg.fusion_alpha << '\n';
    if (cfg.fusion_threshold_psi)
        out << "fusion.threshold_psi = " << *cfg.fusion_threshold_psi << '\n';
    else
        out << "fusion.fit_threshold = eer\n";
    out << "normalization.source = training\n";
    if (cfg.norm_local)
        out << "normalization.local_min = " << cfg.norm_local->min_score << '\n'
            << "normalization.local_max = " << cfg.norm_local->max_score << '\n';
    if (cfg.norm_global)
        out << "normalization.global_min = " << cfg.norm_global->min_score << '\n'
            << "normalization.global_max = " << cfg.norm_global->max_score << '\n';
    out << "output.dir = " << cfg.output_dir.string() << '\n';
    out << "matcher = " << matcher_selection_name(cfg.matcher) << '\n';
    out << "jobs = " << cfg.jobs << '\n';
    return out.str();
}

} // namespace siftfuse
