#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "clarinet/error.hpp"
#include "clarinet/notes.hpp"

namespace clarinet::melody {

/// Notes whose onsets fall within this window count as starting "at the same
/// time". Real performance MIDI rarely has bit-identical onsets.
inline constexpr double kOnsetTolerance = 1e-3;

/// Named importance score for a note. Equal notes always receive equal scores.
struct Criteria {
    std::string name;
    std::function<double(const Note&)> score;

    static Criteria pitch() {
        return {"pitch", [](const Note& n) { return static_cast<double>(n.pitch); }};
    }

    static Criteria velocity() {
        return {"velocity", [](const Note& n) { return static_cast<double>(n.velocity); }};
    }

    static Criteria weighted(double a, double b) {
        return {"weighted:" + std::to_string(a) + "," + std::to_string(b),
                [a, b](const Note& n) { return a * n.pitch + b * n.velocity; }};
    }

    /// Accepts "pitch", "velocity", or "weighted:a,b".
    static Criteria parse(std::string_view text) {
        if (text == "pitch") return pitch();
        if (text == "velocity") return velocity();
        if (text.rfind("weighted:", 0) == 0) {
            std::string args(text.substr(9));
            auto comma = args.find(',');
            if (comma != std::string::npos) {
                try {
                    double a = std::stod(args.substr(0, comma));
                    double b = std::stod(args.substr(comma + 1));
                    return weighted(a, b);
                } catch (const std::exception&) {
                }
            }
        }
        throw ArgumentError("unknown criteria: " + std::string(text) +
                            " (expected pitch, velocity, or weighted:a,b)");
    }
};

struct StabilityReport {
    double mean_duration = 0.0;
    double duration_cv = 0.0;  // population stddev / mean
    std::size_t short_note_count = 0;
    std::size_t note_count = 0;
};

namespace detail {

struct OnsetGroup {
    double onset;  // earliest start in the group
    std::size_t begin, end;
};

inline std::vector<OnsetGroup> group_onsets(const std::vector<Note>& notes) {
    std::vector<OnsetGroup> groups;
    std::size_t i = 0;
    while (i < notes.size()) {
        double onset = notes[i].start;
        std::size_t j = i + 1;
        while (j < notes.size() && notes[j].start <= onset + kOnsetTolerance) ++j;
        groups.push_back({onset, i, j});
        i = j;
    }
    return groups;
}

// Ties break toward higher pitch, then earlier original index.
inline std::size_t argmax_by(const std::vector<Note>& notes, std::size_t begin, std::size_t end,
                             const Criteria& criteria) {
    std::size_t best = begin;
    double best_score = criteria.score(notes[begin]);
    for (std::size_t i = begin + 1; i < end; ++i) {
        double s = criteria.score(notes[i]);
        if (s > best_score || (s == best_score && notes[i].pitch > notes[best].pitch)) {
            best = i;
            best_score = s;
        }
    }
    return best;
}

}  // namespace detail

/// Classic skyline reduction: at each distinct onset keep the highest-pitch
/// note starting there, truncated at the next distinct onset.
inline NoteSequence skyline(const NoteSequence& seq) {
    auto groups = detail::group_onsets(seq.notes);
    std::vector<Note> out;
    out.reserve(groups.size());
    Criteria by_pitch = Criteria::pitch();
    for (std::size_t g = 0; g < groups.size(); ++g) {
        Note n = seq.notes[detail::argmax_by(seq.notes, groups[g].begin, groups[g].end, by_pitch)];
        if (g + 1 < groups.size()) n.end = std::min(n.end, groups[g + 1].onset);
        if (n.end > n.start) out.push_back(n);
    }
    return make_sequence(std::move(out));
}

/// Two-pass skyline variant. Pass 1 picks the per-onset criteria argmax; pass 2
/// re-resolves each selected onset against everything sounding at that moment,
/// so a sustained note interrupted by a lesser onset resumes instead of being
/// discarded. Each emitted segment runs to the next selected onset or the
/// note's own release, whichever is first; on inputs with no overlap this
/// coincides with plain skyline.
inline NoteSequence modified_skyline(const NoteSequence& seq, const Criteria& criteria) {
    const auto& notes = seq.notes;
    // Pass 1: every distinct onset selects its criteria-argmax note, so the
    // important set carries exactly one entry per onset group.
    auto groups = detail::group_onsets(notes);

    std::vector<Note> out;
    out.reserve(groups.size());
    std::size_t last_source = notes.size();
    for (std::size_t k = 0; k < groups.size(); ++k) {
        double t = groups[k].onset;
        std::size_t best = notes.size();
        double best_score = 0.0;
        for (std::size_t i = 0; i < notes.size(); ++i) {
            if (notes[i].start > t + kOnsetTolerance) break;  // sorted by start
            if (notes[i].end <= t) continue;                  // already released
            double s = criteria.score(notes[i]);
            if (best == notes.size() || s > best_score ||
                (s == best_score && notes[i].pitch > notes[best].pitch)) {
                best = i;
                best_score = s;
            }
        }
        if (best == notes.size()) continue;
        Note n = notes[best];
        n.start = t;
        if (k + 1 < groups.size()) n.end = std::min(n.end, groups[k + 1].onset);
        if (n.end <= n.start) continue;
        if (best == last_source && !out.empty() && out.back().end == n.start) {
            out.back().end = n.end;  // same source note winning consecutive onsets is one sustained note
        } else {
            out.push_back(n);
        }
        last_source = best;
    }
    return make_sequence(std::move(out));
}

inline NoteSequence modified_skyline(const NoteSequence& seq) {
    return modified_skyline(seq, Criteria::pitch());
}

/// Duration statistics of a monophonic melody: coefficient of variation of
/// note durations plus a count of sub-threshold "perturbation" notes.
inline StabilityReport stability(const NoteSequence& seq, double short_threshold = 0.05) {
    if (!is_monophonic(seq.notes)) throw ArgumentError("stability: sequence must be monophonic");
    StabilityReport report;
    report.note_count = seq.notes.size();
    if (seq.notes.empty()) return report;

    double sum = 0.0;
    for (const Note& n : seq.notes) {
        double d = n.duration();
        sum += d;
        if (d < short_threshold) ++report.short_note_count;
    }
    double mean = sum / static_cast<double>(seq.notes.size());
    double var = 0.0;
    for (const Note& n : seq.notes) {
        double d = n.duration() - mean;
        var += d * d;
    }
    var /= static_cast<double>(seq.notes.size());
    report.mean_duration = mean;
    report.duration_cv = mean > 0.0 ? std::sqrt(var) / mean : 0.0;
    return report;
}

}  // namespace clarinet::melody
