#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "clarinet/error.hpp"
#include "clarinet/notes.hpp"

namespace clarinet::normalize {

struct Tempo {
    double bpm = 120.0;  // clamped to [20, 300]
};

inline Tempo make_tempo(double bpm) {
    return Tempo{std::min(300.0, std::max(20.0, bpm))};
}

enum class Mode { Major, Minor };

inline const char* to_string(Mode m) { return m == Mode::Major ? "major" : "minor"; }

struct Key {
    int tonic = 0;  // pitch class 0..11
    Mode mode = Mode::Major;

    friend bool operator==(const Key&, const Key&) = default;
};

/// Note duration in music units: (4 * bpm / 15) * seconds. At 120 BPM a
/// sixteenth note (0.125 s) maps to 4 units.
inline double duration_to_units(double dur_s, Tempo tempo) {
    if (dur_s < 0.0) throw ArgumentError("duration_to_units: negative duration");
    return 4.0 * tempo.bpm / 15.0 * dur_s;
}

/// Modal inter-onset interval read as the beat period, octave-folded into
/// [60, 200) BPM. Histogram bins are 10 ms wide; the reported period is the
/// mean of the modal bin, so exactly regular onsets give exact tempi.
inline Tempo estimate_tempo(const NoteSequence& seq) {
    if (seq.size() < 2) throw EstimationError("tempo estimation needs at least 2 notes");

    struct Bin {
        int count = 0;
        double sum = 0.0;
    };
    std::map<std::int64_t, Bin> bins;
    for (std::size_t i = 1; i < seq.notes.size(); ++i) {
        double ioi = seq.notes[i].start - seq.notes[i - 1].start;
        if (ioi <= 1e-3) continue;  // chord onsets carry no beat information
        auto idx = static_cast<std::int64_t>(std::floor(ioi / 0.01 + 1e-9));
        bins[idx].count += 1;
        bins[idx].sum += ioi;
    }
    if (bins.empty()) throw EstimationError("tempo estimation needs distinct onsets");

    const Bin* modal = nullptr;
    for (const auto& [idx, bin] : bins) {
        if (!modal || bin.count > modal->count) modal = &bin;  // ties keep the shorter period
    }
    double period = modal->sum / modal->count;
    double bpm = 60.0 / period;
    while (bpm >= 200.0) bpm /= 2.0;
    while (bpm < 60.0) bpm *= 2.0;
    return make_tempo(bpm);
}

/// Krumhansl-Schmuckler key profiles (C-rooted).
inline constexpr std::array<double, 12> kMajorProfile = {6.35, 2.23, 3.48, 2.33, 4.38, 4.09,
                                                         2.52, 5.19, 2.39, 3.66, 2.29, 2.88};
inline constexpr std::array<double, 12> kMinorProfile = {6.33, 2.68, 3.52, 5.38, 2.60, 3.53,
                                                         2.54, 4.75, 3.98, 2.69, 3.34, 3.17};

namespace detail {

inline double pearson(const std::array<double, 12>& x, const std::array<double, 12>& y) {
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < 12; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= 12.0;
    my /= 12.0;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (int i = 0; i < 12; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace detail

/// Maximizes Pearson correlation between the duration-weighted pitch-class
/// histogram and the 24 rotated Krumhansl-Schmuckler profiles. Ties break
/// toward the lower tonic, major over minor.
inline Key detect_key(const NoteSequence& seq) {
    if (seq.empty()) throw ArgumentError("detect_key: empty sequence");

    std::array<double, 12> hist{};
    double total = 0.0;
    for (const Note& n : seq.notes) {
        hist[n.pitch % 12] += n.duration();
        total += n.duration();
    }
    if (total <= 0.0) {
        hist.fill(0.0);
        for (const Note& n : seq.notes) hist[n.pitch % 12] += 1.0;
    }

    Key best{0, Mode::Major};
    double best_r = -2.0;
    for (int tonic = 0; tonic < 12; ++tonic) {
        for (Mode mode : {Mode::Major, Mode::Minor}) {
            const auto& profile = mode == Mode::Major ? kMajorProfile : kMinorProfile;
            std::array<double, 12> rotated{};
            for (int pc = 0; pc < 12; ++pc) rotated[pc] = profile[(pc - tonic + 12) % 12];
            double r = detail::pearson(hist, rotated);
            if (r > best_r) {
                best_r = r;
                best = Key{tonic, mode};
            }
        }
    }
    return best;
}

/// Semitone shift that moves `key` to the C reference, within [-6, +6).
inline int reference_shift(Key key) {
    return key.tonic <= 6 ? -key.tonic : 12 - key.tonic;
}

/// Shifts every pitch so the detected tonic lands on C, choosing the direction
/// that minimizes register change. Pitches pushed outside 0..127 fold back by
/// octaves; times are unchanged.
inline NoteSequence transpose_to_reference(const NoteSequence& seq, Key key) {
    int shift = reference_shift(key);
    std::vector<Note> out;
    out.reserve(seq.size());
    for (Note n : seq.notes) {
        int p = n.pitch + shift;
        while (p < 0) p += 12;
        while (p > 127) p -= 12;
        n.pitch = p;
        out.push_back(n);
    }
    return make_sequence(std::move(out));
}

}  // namespace clarinet::normalize
