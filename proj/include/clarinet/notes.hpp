#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "clarinet/error.hpp"

namespace clarinet {

/// One sounded pitch. Times are seconds from the start of the sequence.
struct Note {
    int pitch = 0;      // MIDI note number, 0..127
    int velocity = 64;  // 1..127
    double start = 0.0;
    double end = 0.0;  // end >= start

    double duration() const { return end - start; }

    friend bool operator==(const Note&, const Note&) = default;
};

inline bool note_order(const Note& a, const Note& b) {
    if (a.start != b.start) return a.start < b.start;
    return a.pitch < b.pitch;
}

inline bool note_in_range(const Note& n) {
    return n.pitch >= 0 && n.pitch <= 127 && n.velocity >= 1 && n.velocity <= 127 &&
           n.start >= 0.0 && n.end >= n.start;
}

/// True when no note overlaps the next one. Requires (start, pitch) order.
inline bool is_monophonic(const std::vector<Note>& notes) {
    for (std::size_t i = 1; i < notes.size(); ++i) {
        if (notes[i - 1].end > notes[i].start + 1e-9) return false;
    }
    return true;
}

/// Time-ordered notes plus a monophonic flag. Both raw parses and extracted
/// melodies use this type; values are immutable by convention once built.
struct NoteSequence {
    std::vector<Note> notes;
    bool monophonic = false;

    bool empty() const { return notes.empty(); }
    std::size_t size() const { return notes.size(); }

    /// End of the last sounding note, 0 for an empty sequence.
    double duration() const {
        double d = 0.0;
        for (const Note& n : notes) d = std::max(d, n.end);
        return d;
    }
};

/// Sorts by (start, pitch) and recomputes the monophonic flag.
inline NoteSequence make_sequence(std::vector<Note> notes) {
    std::sort(notes.begin(), notes.end(), note_order);
    bool mono = is_monophonic(notes);
    return NoteSequence{std::move(notes), mono};
}

/// Notes intersecting [start_s, end_s), cropped to the window and re-based so
/// the clip starts at 0. Notes whose cropped duration is zero are dropped.
inline NoteSequence clip(const NoteSequence& seq, double start_s, double end_s) {
    if (!(end_s > start_s)) throw ArgumentError("clip: end must be greater than start");
    std::vector<Note> out;
    for (const Note& n : seq.notes) {
        double ns = std::max(n.start, start_s);
        double ne = std::min(n.end, end_s);
        if (ne > ns) out.push_back(Note{n.pitch, n.velocity, ns - start_s, ne - start_s});
    }
    return make_sequence(std::move(out));
}

}  // namespace clarinet
