#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"

namespace siftfuse {

// Whether low scores mean similar (distance) or high scores do (similarity).
enum class Polarity { distance, similarity };

struct ScoreEntry {
    std::string probe_id;
    std::string gallery_id;
    std::string subject_probe;
    std::string subject_gallery;
    double score = 0.0;

    bool genuine() const { return subject_probe == subject_gallery; }
};

struct ScoreMatrix {
    std::vector<ScoreEntry> entries;

    std::size_t genuine_count() const {
        std::size_t n = 0;
        for (const auto& e : entries) n += e.genuine();
        return n;
    }
    std::size_t impostor_count() const { return entries.size() - genuine_count(); }
};

struct RocPoint {
    double threshold = 0.0;
    double far = 0.0; // fraction of impostor entries accepted
    double frr = 0.0; // fraction of genuine entries rejected
};

struct EvalReport {
    double frr_at_eer = 0.0;        // percent
    double far_at_eer = 0.0;        // percent
    double eer = 0.0;               // percent
    double eer_threshold = 0.0;     // operating threshold at the EER point
    double recognition_rate = 0.0;  // percent, rank-1 identification
    double accuracy_at_eer = 0.0;   // percent of entries classified correctly at the EER threshold
    std::vector<RocPoint> roc_points;
};

inline bool accepts(double score, double threshold, Polarity polarity) {
    return polarity == Polarity::distance ? score <= threshold : score >= threshold;
}

// Sweeps every distinct score as an acceptance threshold. The EER operating
// point minimizes |FAR - FRR| and the EER is reported as their midpoint
// there. roc_points are ordered from the tightest to the loosest threshold.
inline EvalReport compute_eer(const ScoreMatrix& matrix, Polarity polarity) {
    std::vector<double> genuine, impostor;
    for (const auto& e : matrix.entries)
        (e.genuine() ? genuine : impostor).push_back(e.score);
    if (genuine.empty() || impostor.empty())
        throw DegenerateMatrix("compute_eer: need both genuine and impostor entries");

    std::sort(genuine.begin(), genuine.end());
    std::sort(impostor.begin(), impostor.end());

    std::vector<double> thresholds;
    thresholds.reserve(matrix.entries.size());
    for (const auto& e : matrix.entries) thresholds.push_back(e.score);
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    if (polarity == Polarity::similarity)
        std::reverse(thresholds.begin(), thresholds.end()); // tight -> loose

    EvalReport report;
    report.roc_points.reserve(thresholds.size());
    double best_gap = std::numeric_limits<double>::infinity();
    for (double t : thresholds) {
        std::size_t genuine_accepted, impostor_accepted;
        if (polarity == Polarity::distance) {
            genuine_accepted = std::upper_bound(genuine.begin(), genuine.end(), t) - genuine.begin();
            impostor_accepted = std::upper_bound(impostor.begin(), impostor.end(), t) - impostor.begin();
        } else {
            genuine_accepted = genuine.end() - std::lower_bound(genuine.begin(), genuine.end(), t);
            impostor_accepted = impostor.end() - std::lower_bound(impostor.begin(), impostor.end(), t);
        }
        const double far = static_cast<double>(impostor_accepted) / impostor.size();
        const double frr = 1.0 - static_cast<double>(genuine_accepted) / genuine.size();
        report.roc_points.push_back(RocPoint{t, far, frr});

        const double gap = std::abs(far - frr);
        if (gap < best_gap) {
            best_gap = gap;
            report.far_at_eer = far * 100.0;
            report.frr_at_eer = frr * 100.0;
            report.eer = (far + frr) / 2.0 * 100.0;
            report.eer_threshold = t;
            const double correct = (1.0 - frr) * genuine.size() + (1.0 - far) * impostor.size();
            report.accuracy_at_eer = correct / matrix.entries.size() * 100.0;
        }
    }
    return report;
}

// Rank-1 identification rate: the fraction of probes whose best-scoring
// gallery entry belongs to the probe's subject. Ties break toward the
// lexicographically first gallery_id and count as correct only if that
// winner matches.
inline double recognition_rate(const ScoreMatrix& matrix, Polarity polarity) {
    if (matrix.entries.empty())
        throw DegenerateMatrix("recognition_rate: empty score matrix");

    struct Best {
        double score;
        std::string gallery_id;
        bool genuine;
    };
    std::map<std::string, Best> best_per_probe;
    for (const auto& e : matrix.entries) {
        const bool better_score = [&](const Best& cur) {
            if (polarity == Polarity::distance)
                return e.score < cur.score;
            return e.score > cur.score;
        };
        auto it = best_per_probe.find(e.probe_id);
        if (it == best_per_probe.end()) {
            best_per_probe.emplace(e.probe_id, Best{e.score, e.gallery_id, e.genuine()});
        } else if (better_score(it->second) ||
                   (e.score == it->second.score && e.gallery_id < it->second.gallery_id)) {
            it->second = Best{e.score, e.gallery_id, e.genuine()};
        }
    }

    std::size_t correct = 0;
    for (const auto& [probe, best] : best_per_probe) correct += best.genuine;
    return static_cast<double>(correct) / best_per_probe.size() * 100.0;
}

// CSV dump of the full threshold sweep, 6-decimal fixed precision.
inline void emit_roc(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot open ROC output file: " + path.string());
    out << "threshold,far,frr\n" << std::fixed << std::setprecision(6);
    for (const auto& p : report.roc_points)
        out << p.threshold << ',' << p.far << ',' << p.frr << '\n';
    if (!out)
        throw IoError("write failed: " + path.string());
}

// Plain-text summary, one key-value line per report field.
inline std::string format_report(const EvalReport& report) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(6);
    out << "frr_at_eer_percent=" << report.frr_at_eer << '\n';
    out << "far_at_eer_percent=" << report.far_at_eer << '\n';
    out << "eer_percent=" << report.eer << '\n';
    out << "eer_threshold=" << report.eer_threshold << '\n';
    out << "rank1_recognition_rate_percent=" << report.recognition_rate << '\n';
    out << "accuracy_at_eer_percent=" << report.accuracy_at_eer << '\n';
    out << "roc_points=" << report.roc_points.size() << '\n';
    return out.str();
}

} // namespace siftfuse
