#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "clarinet/error.hpp"
#include "clarinet/normalize.hpp"
#include "clarinet/notes.hpp"

namespace clarinet::similarity {

/// One melody note as seen by the string algorithms: its pitch, the source
/// time span (for time windowing), and a music-unit duration when the melody
/// has been tempo-processed.
struct Symbol {
    int pitch = 0;
    double start_s = 0.0;
    double end_s = 0.0;
    std::optional<double> duration_units;
};

struct SymbolSequence {
    std::vector<Symbol> symbols;
    bool with_durations = false;

    bool empty() const { return symbols.empty(); }
    std::size_t size() const { return symbols.size(); }

    double duration() const {
        double d = 0.0;
        for (const Symbol& s : symbols) d = std::max(d, s.end_s);
        return d;
    }

    std::vector<int> pitches() const {
        std::vector<int> p;
        p.reserve(symbols.size());
        for (const Symbol& s : symbols) p.push_back(s.pitch);
        return p;
    }
};

/// Sliding-window parameters: window duration and stride in seconds for the
/// time variant, stride in notes for the note variant.
struct RsaParams {
    double window_time = 5.0;  // T_0
    double stride_time = 1.0;  // T_S
    std::size_t stride_notes = 1;  // N_S

    void validate() const {
        if (window_time <= 0.0) throw ArgumentError("window_time must be positive");
        if (stride_time <= 0.0) throw ArgumentError("stride_time must be positive");
        if (stride_notes < 1) throw ArgumentError("stride_notes must be at least 1");
    }
};

/// Mongeau-Sankoff edit weights. Substitution charges the semitone interval
/// class (0..6 after folding) plus a capped duration-difference term;
/// consolidation and fragmentation charge a base cost plus the same duration
/// term on the merged span.
struct MsWeights {
    double insert_delete_base = 1.0;
    std::array<double, 7> interval_costs = {0.0, 0.9, 0.2, 0.5, 0.35, 0.1, 0.8};
    double fragmentation_base = 0.6;
    double duration_coeff = 0.3;
    double duration_cap = 1.0;
    std::size_t max_span = 4;  // K: most notes merged by one consolidation/fragmentation

    void validate() const {
        if (insert_delete_base < 0.0 || fragmentation_base < 0.0 || duration_coeff < 0.0 ||
            duration_cap < 0.0) {
            throw ArgumentError("ms weights must be non-negative");
        }
        for (double c : interval_costs) {
            if (c < 0.0) throw ArgumentError("ms interval costs must be non-negative");
        }
        if (interval_costs[0] != 0.0) throw ArgumentError("exact pitch match must cost 0");
        if (max_span < 1) throw ArgumentError("max_span must be at least 1");
    }

    /// Unit insert/delete, 0/1 substitution, duration-insensitive, K=1:
    /// reduces the distance to plain Levenshtein.
    static MsWeights levenshtein_equivalent() {
        MsWeights w;
        w.interval_costs = {0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
        w.duration_coeff = 0.0;
        w.max_span = 1;
        return w;
    }
};

struct SimilarityScore {
    double value = 0.0;         // 1 - raw/len(Q), clamped into [0, 1]
    double raw_distance = 0.0;  // L_{Q,D}
    double best_window_offset = 0.0;  // seconds (time windows) or note index (note windows)
};

/// One symbol per melody note, in time order. Polyphonic input is rejected;
/// melody extraction must run first.
inline SymbolSequence encode_pitch_string(const NoteSequence& seq) {
    if (!is_monophonic(seq.notes)) {
        throw ArgumentError("encode_pitch_string: polyphonic input, extract a melody first");
    }
    SymbolSequence out;
    out.symbols.reserve(seq.size());
    for (const Note& n : seq.notes) out.symbols.push_back({n.pitch, n.start, n.end, std::nullopt});
    return out;
}

/// Processed form: the same encoding with durations converted to music units.
inline SymbolSequence encode_pitch_string(const NoteSequence& seq, normalize::Tempo tempo) {
    SymbolSequence out = encode_pitch_string(seq);
    for (Symbol& s : out.symbols) {
        s.duration_units = normalize::duration_to_units(s.end_s - s.start_s, tempo);
    }
    out.with_durations = true;
    return out;
}

/// True iff the query's pitch list is a contiguous substring of the document's.
inline bool boolean_match(const SymbolSequence& query, const SymbolSequence& doc) {
    auto q = query.pitches();
    auto d = doc.pitches();
    return std::search(d.begin(), d.end(), q.begin(), q.end()) != d.end();
}

/// Unweighted edit distance over pitch symbols.
inline int levenshtein(std::span<const int> a, std::span<const int> b) {
    const std::size_t m = a.size(), n = b.size();
    std::vector<int> row(n + 1);
    std::iota(row.begin(), row.end(), 0);
    for (std::size_t i = 1; i <= m; ++i) {
        int diag = row[0];
        row[0] = static_cast<int>(i);
        for (std::size_t j = 1; j <= n; ++j) {
            int old = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = old;
        }
    }
    return row[n];
}

inline int levenshtein(const SymbolSequence& a, const SymbolSequence& b) {
    auto pa = a.pitches();
    auto pb = b.pitches();
    return levenshtein(std::span<const int>(pa), std::span<const int>(pb));
}

namespace detail {

inline SimilarityScore scored(double raw, double query_len, double offset) {
    double value = query_len > 0.0 ? 1.0 - raw / query_len : 0.0;
    return SimilarityScore{std::clamp(value, 0.0, 1.0), raw, offset};
}

}  // namespace detail

/// Time-based sliding window: a window of `window_time` seconds advances by
/// `stride_time`; a note belongs to the window containing its onset. The raw
/// distance is the minimum Levenshtein over all windows. A document shorter
/// than the window is scored as one whole-document window.
inline SimilarityScore rsa_time(const SymbolSequence& query, const SymbolSequence& doc,
                                const RsaParams& params) {
    params.validate();
    if (query.empty()) return SimilarityScore{0.0, 0.0, 0.0};

    auto q = query.pitches();
    auto d = doc.pitches();
    std::vector<double> onsets;
    onsets.reserve(doc.size());
    for (const Symbol& s : doc.symbols) onsets.push_back(s.start_s);

    double doc_end = doc.duration();
    int best = std::numeric_limits<int>::max();
    double best_offset = 0.0;
    for (double t = 0.0;; t += params.stride_time) {
        auto lo = std::lower_bound(onsets.begin(), onsets.end(), t) - onsets.begin();
        auto hi = std::lower_bound(onsets.begin(), onsets.end(), t + params.window_time) - onsets.begin();
        std::span<const int> window(d.data() + lo, static_cast<std::size_t>(hi - lo));
        int dist = levenshtein(std::span<const int>(q), window);
        if (dist < best) {
            best = dist;
            best_offset = t;
        }
        if (t + params.window_time + params.stride_time > doc_end) break;
    }
    return detail::scored(best, static_cast<double>(q.size()), best_offset);
}

/// Note-based sliding window: the window is len(query) symbols wide and
/// advances by `stride_notes`. With stride 1 the raw distance is the minimum
/// over every contiguous substring of that length.
inline SimilarityScore rsa_note(const SymbolSequence& query, const SymbolSequence& doc,
                                const RsaParams& params) {
    params.validate();
    if (query.empty()) return SimilarityScore{0.0, 0.0, 0.0};

    auto q = query.pitches();
    auto d = doc.pitches();
    const std::size_t nw = q.size();

    int best = std::numeric_limits<int>::max();
    double best_offset = 0.0;
    if (d.size() < nw) {
        best = levenshtein(std::span<const int>(q), std::span<const int>(d));
    } else {
        for (std::size_t i = 0; i + nw <= d.size(); i += params.stride_notes) {
            int dist = levenshtein(std::span<const int>(q), std::span<const int>(d.data() + i, nw));
            if (dist < best) {
                best = dist;
                best_offset = static_cast<double>(i);
            }
        }
    }
    return detail::scored(best, static_cast<double>(nw), best_offset);
}

namespace detail {

inline double interval_cost(const MsWeights& w, int pa, int pb) {
    int d = std::abs(pa - pb) % 12;
    if (d > 6) d = 12 - d;
    return w.interval_costs[static_cast<std::size_t>(d)];
}

inline double duration_cost(const MsWeights& w, double da, double db) {
    return std::min(w.duration_coeff * std::abs(da - db), w.duration_cap);
}

}  // namespace detail

/// Weighted melodic edit distance over (pitch, duration) symbols with the six
/// operations: match, substitution, deletion, insertion, consolidation (up to
/// K source notes merge into one target note) and fragmentation (one source
/// note splits into up to K target notes). Merged spans compare their summed
/// durations. Requires processed sequences.
inline double mongeau_sankoff(const SymbolSequence& a, const SymbolSequence& b, const MsWeights& w) {
    w.validate();
    if ((!a.with_durations && !a.empty()) || (!b.with_durations && !b.empty())) {
        throw ArgumentError("mongeau_sankoff: sequences lack durations, run processing first");
    }

    const std::size_t m = a.size(), n = b.size();
    std::vector<double> da(m), db(n), pa_sum(m + 1, 0.0), pb_sum(n + 1, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        da[i] = a.symbols[i].duration_units.value();
        pa_sum[i + 1] = pa_sum[i] + da[i];
    }
    for (std::size_t j = 0; j < n; ++j) {
        db[j] = b.symbols[j].duration_units.value();
        pb_sum[j + 1] = pb_sum[j] + db[j];
    }

    std::vector<double> dp((m + 1) * (n + 1), 0.0);
    auto at = [&](std::size_t i, std::size_t j) -> double& { return dp[i * (n + 1) + j]; };
    for (std::size_t i = 1; i <= m; ++i) at(i, 0) = at(i - 1, 0) + w.insert_delete_base;
    for (std::size_t j = 1; j <= n; ++j) at(0, j) = at(0, j - 1) + w.insert_delete_base;

    for (std::size_t i = 1; i <= m; ++i) {
        for (std::size_t j = 1; j <= n; ++j) {
            int pa = a.symbols[i - 1].pitch;
            int pb = b.symbols[j - 1].pitch;
            double best = at(i - 1, j - 1) + detail::interval_cost(w, pa, pb) +
                          detail::duration_cost(w, da[i - 1], db[j - 1]);
            best = std::min(best, at(i - 1, j) + w.insert_delete_base);
            best = std::min(best, at(i, j - 1) + w.insert_delete_base);
            for (std::size_t k = 2; k <= w.max_span && k <= i; ++k) {
                double merged = pa_sum[i] - pa_sum[i - k];
                best = std::min(best, at(i - k, j - 1) + w.fragmentation_base +
                                          detail::duration_cost(w, merged, db[j - 1]));
            }
            for (std::size_t k = 2; k <= w.max_span && k <= j; ++k) {
                double merged = pb_sum[j] - pb_sum[j - k];
                best = std::min(best, at(i - 1, j - k) + w.fragmentation_base +
                                          detail::duration_cost(w, da[i - 1], merged));
            }
            at(i, j) = best;
        }
    }
    return at(m, n);
}

/// Mongeau-Sankoff inside the note-window scheme: window = len(query) symbols,
/// stride `stride_notes`; score = 1 - min_cost / (len(query) * insert_delete_base).
inline SimilarityScore ms_similarity(const SymbolSequence& query, const SymbolSequence& doc,
                                     const MsWeights& w, const RsaParams& params) {
    params.validate();
    if (query.empty() || doc.empty()) return SimilarityScore{0.0, 0.0, 0.0};

    const std::size_t nw = query.size();
    double best = std::numeric_limits<double>::infinity();
    double best_offset = 0.0;
    auto window = [&](std::size_t lo, std::size_t len) {
        SymbolSequence win;
        win.with_durations = doc.with_durations;
        win.symbols.assign(doc.symbols.begin() + static_cast<std::ptrdiff_t>(lo),
                           doc.symbols.begin() + static_cast<std::ptrdiff_t>(lo + len));
        return win;
    };
    if (doc.size() < nw) {
        best = mongeau_sankoff(query, doc, w);
    } else {
        for (std::size_t i = 0; i + nw <= doc.size(); i += params.stride_notes) {
            double cost = mongeau_sankoff(query, window(i, nw), w);
            if (cost < best) {
                best = cost;
                best_offset = static_cast<double>(i);
            }
        }
    }
    double denom = static_cast<double>(nw) * w.insert_delete_base;
    double value = denom > 0.0 ? 1.0 - best / denom : 0.0;
    return SimilarityScore{std::clamp(value, 0.0, 1.0), best, best_offset};
}

}  // namespace clarinet::similarity
