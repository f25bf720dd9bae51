#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "clarinet/error.hpp"
#include "clarinet/notes.hpp"

namespace clarinet::midi {

/// Piecewise-constant tempo over the tick timeline. The first segment always
/// starts at tick 0; 500000 us/quarter (120 BPM) when the file has no tempo event.
struct TempoMap {
    struct Segment {
        std::int64_t tick = 0;
        std::int64_t us_per_quarter = 500000;

        friend bool operator==(const Segment&, const Segment&) = default;
    };

    int ticks_per_quarter = 480;
    std::vector<Segment> segments{Segment{}};

    static TempoMap fixed_bpm(double bpm, int tpq = 480) {
        TempoMap t;
        t.ticks_per_quarter = tpq;
        t.segments = {Segment{0, static_cast<std::int64_t>(6.0e7 / bpm + 0.5)}};
        return t;
    }

    double initial_bpm() const { return 6.0e7 / static_cast<double>(segments.front().us_per_quarter); }

    double tick_to_seconds(std::int64_t tick) const {
        double seconds = 0.0;
        for (std::size_t i = 0; i < segments.size(); ++i) {
            std::int64_t seg_start = segments[i].tick;
            std::int64_t seg_end = (i + 1 < segments.size()) ? segments[i + 1].tick : tick;
            std::int64_t upto = std::min(tick, std::max(seg_end, seg_start));
            if (upto > seg_start) {
                seconds += static_cast<double>(upto - seg_start) *
                           static_cast<double>(segments[i].us_per_quarter) * 1e-6 / ticks_per_quarter;
            }
            if (seg_end >= tick) break;
        }
        return seconds;
    }

    std::int64_t seconds_to_tick(double seconds) const {
        double cum = 0.0;
        for (std::size_t i = 0; i < segments.size(); ++i) {
            bool last = i + 1 == segments.size();
            double seg_span = 0.0;
            if (!last) {
                seg_span = static_cast<double>(segments[i + 1].tick - segments[i].tick) *
                           static_cast<double>(segments[i].us_per_quarter) * 1e-6 / ticks_per_quarter;
            }
            if (last || seconds <= cum + seg_span) {
                double ticks_per_second = 1e6 * ticks_per_quarter / static_cast<double>(segments[i].us_per_quarter);
                return segments[i].tick + static_cast<std::int64_t>(std::llround((seconds - cum) * ticks_per_second));
            }
            cum += seg_span;
        }
        return 0;  // unreachable: segments is never empty
    }

    friend bool operator==(const TempoMap&, const TempoMap&) = default;
};

struct SmfData {
    NoteSequence sequence;
    TempoMap tempo;
};

namespace detail {

class Cursor {
public:
    explicit Cursor(std::span<const std::uint8_t> data) : data_(data) {}

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }

    void need(std::size_t n, const char* what) const {
        if (remaining() < n) throw ParseError(std::string("truncated ") + what, pos_);
    }

    std::uint8_t peek() const {
        need(1, "data");
        return data_[pos_];
    }

    std::uint8_t u8(const char* what = "byte") {
        need(1, what);
        return data_[pos_++];
    }

    std::uint16_t u16be(const char* what) {
        need(2, what);
        std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] << 8 | data_[pos_ + 1]);
        pos_ += 2;
        return v;
    }

    std::uint32_t u32be(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = v << 8 | data_[pos_ + i];
        pos_ += 4;
        return v;
    }

    // Variable-length quantity, at most 4 bytes per the SMF spec.
    std::uint32_t vlq(const char* what) {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            std::uint8_t b = u8(what);
            v = v << 7 | (b & 0x7F);
            if ((b & 0x80) == 0) return v;
        }
        throw ParseError(std::string("overlong variable-length quantity in ") + what, pos_);
    }

    std::uint8_t data7(const char* what) {
        std::uint8_t b = u8(what);
        if (b & 0x80) throw ParseError(std::string("data byte has high bit set in ") + what, pos_ - 1);
        return b;
    }

    void skip(std::size_t n, const char* what) {
        need(n, what);
        pos_ += n;
    }

    bool match4(const char* tag) {
        need(4, "chunk id");
        for (int i = 0; i < 4; ++i) {
            if (data_[pos_ + i] != static_cast<std::uint8_t>(tag[i])) return false;
        }
        pos_ += 4;
        return true;
    }

private:
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

struct RawNote {
    int pitch;
    int velocity;
    std::int64_t on_tick;
    std::int64_t off_tick;
};

}  // namespace detail

/// Parses SMF format 0/1 bytes into notes (seconds, all tracks merged) and the
/// tempo map. Note-on with velocity 0 closes a note; a repeated note-on for the
/// same channel+pitch retriggers (closes the first). Unmatched note-ons are
/// closed at end of track. SMPTE time division and format 2 are rejected.
inline SmfData parse_smf(std::span<const std::uint8_t> bytes) {
    detail::Cursor cur(bytes);
    if (!cur.match4("MThd")) throw ParseError("not a Standard MIDI File: missing MThd", 0);
    std::uint32_t header_len = cur.u32be("header length");
    if (header_len < 6) throw ParseError("MThd length too small", cur.pos() - 4);
    std::uint16_t format = cur.u16be("format");
    std::uint16_t ntrks = cur.u16be("track count");
    std::size_t division_at = cur.pos();
    std::uint16_t division = cur.u16be("division");
    if (format > 1) throw ParseError("unsupported SMF format " + std::to_string(format), division_at - 4);
    if (division & 0x8000) throw ParseError("SMPTE time division is not supported", division_at);
    if (division == 0) throw ParseError("time division is zero", division_at);
    if (header_len > 6) cur.skip(header_len - 6, "header");

    std::vector<detail::RawNote> raw;
    std::map<std::int64_t, std::int64_t> tempo_at_tick;  // tick -> us per quarter

    for (std::uint16_t t = 0; t < ntrks; ++t) {
        // Unknown chunk types are skipped, as the SMF spec directs.
        while (!cur.match4("MTrk")) {
            cur.skip(4, "chunk id");
            std::uint32_t len = cur.u32be("chunk length");
            cur.skip(len, "chunk body");
        }
        std::uint32_t track_len = cur.u32be("track length");
        cur.need(track_len, "track body");
        std::size_t track_end = cur.pos() + track_len;

        std::int64_t tick = 0;
        std::uint8_t running = 0;
        std::map<int, std::pair<std::int64_t, int>> open;  // channel<<8|pitch -> (on tick, velocity)

        auto close_note = [&](int key, std::int64_t off_tick) {
            auto it = open.find(key);
            if (it == open.end()) return;  // stray note-off, ignore
            raw.push_back({key & 0x7F, it->second.second, it->second.first, off_tick});
            open.erase(it);
        };

        bool ended = false;
        while (cur.pos() < track_end && !ended) {
            tick += cur.vlq("delta time");
            std::uint8_t status = cur.peek();
            if (status & 0x80) {
                cur.u8();
                if (status < 0xF0) {
                    running = status;
                } else {
                    running = 0;  // sysex/meta cancel running status
                }
            } else {
                if (running == 0) throw ParseError("data byte without running status", cur.pos());
                status = running;
            }

            switch (status & 0xF0) {
                case 0x80: {
                    int pitch = cur.data7("note-off");
                    cur.data7("note-off velocity");
                    close_note((status & 0x0F) << 8 | pitch, tick);
                    break;
                }
                case 0x90: {
                    int pitch = cur.data7("note-on");
                    int vel = cur.data7("note-on velocity");
                    int key = (status & 0x0F) << 8 | pitch;
                    if (vel == 0) {
                        close_note(key, tick);  // zero-velocity note-on is a note-off
                    } else {
                        close_note(key, tick);  // retrigger: second onset closes the first
                        open[key] = {tick, vel};
                    }
                    break;
                }
                case 0xA0:
                case 0xB0:
                case 0xE0:
                    cur.data7("event data");
                    cur.data7("event data");
                    break;
                case 0xC0:
                case 0xD0:
                    cur.data7("event data");
                    break;
                case 0xF0: {
                    if (status == 0xFF) {
                        std::uint8_t type = cur.u8("meta type");
                        std::uint32_t len = cur.vlq("meta length");
                        std::size_t body_at = cur.pos();
                        cur.skip(len, "meta body");
                        if (type == 0x51) {
                            if (len != 3) throw ParseError("set-tempo meta must carry 3 bytes", body_at);
                            std::int64_t us = static_cast<std::int64_t>(bytes[body_at]) << 16 |
                                              static_cast<std::int64_t>(bytes[body_at + 1]) << 8 |
                                              static_cast<std::int64_t>(bytes[body_at + 2]);
                            if (us == 0) throw ParseError("set-tempo meta is zero", body_at);
                            tempo_at_tick[tick] = us;
                        } else if (type == 0x2F) {
                            ended = true;
                        }
                    } else if (status == 0xF0 || status == 0xF7) {
                        std::uint32_t len = cur.vlq("sysex length");
                        cur.skip(len, "sysex body");
                    } else {
                        throw ParseError("unexpected status byte " + std::to_string(status), cur.pos() - 1);
                    }
                    break;
                }
                default:
                    throw ParseError("unexpected status byte " + std::to_string(status), cur.pos() - 1);
            }
        }
        for (auto& [key, on] : open) {
            raw.push_back({key & 0x7F, on.second, on.first, tick});
        }
        // Position past the declared track length even if end-of-track came early.
        cur.skip(track_end - cur.pos(), "track body");
    }

    TempoMap tempo;
    tempo.ticks_per_quarter = division;
    if (!tempo_at_tick.empty()) {
        tempo.segments.clear();
        if (tempo_at_tick.begin()->first != 0) tempo.segments.push_back({0, 500000});
        for (auto& [tk, us] : tempo_at_tick) tempo.segments.push_back({tk, us});
    }

    std::vector<Note> notes;
    notes.reserve(raw.size());
    for (const auto& r : raw) {
        if (r.off_tick <= r.on_tick) continue;  // zero-duration notes are dropped
        notes.push_back(Note{r.pitch, r.velocity, tempo.tick_to_seconds(r.on_tick), tempo.tick_to_seconds(r.off_tick)});
    }
    return SmfData{make_sequence(std::move(notes)), std::move(tempo)};
}

inline SmfData parse_smf(const std::vector<std::uint8_t>& bytes) {
    return parse_smf(std::span<const std::uint8_t>(bytes.data(), bytes.size()));
}

namespace detail {

inline void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline void put_u16be(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline void put_vlq(std::vector<std::uint8_t>& out, std::int64_t v) {
    if (v < 0 || v > 0x0FFFFFFF) throw ArgumentError("delta time out of variable-length range");
    std::uint8_t buf[4];
    int n = 0;
    do {
        buf[n++] = static_cast<std::uint8_t>(v & 0x7F);
        v >>= 7;
    } while (v > 0);
    while (n > 1) out.push_back(buf[--n] | 0x80);
    out.push_back(buf[0]);
}

struct WriteEvent {
    std::int64_t tick;
    int order;  // 0 tempo, 1 note-off, 2 note-on
    std::uint8_t status;
    std::uint8_t a, b;
    std::int64_t tempo_us = 0;
};

}  // namespace detail

/// Serializes a note sequence as a format-0 SMF using the given tempo map for
/// tick quantization. Re-parsing reproduces the notes within one tick.
inline std::vector<std::uint8_t> write_smf(const NoteSequence& seq, const TempoMap& tempo) {
    std::vector<detail::WriteEvent> events;
    for (const auto& seg : tempo.segments) {
        events.push_back({seg.tick, 0, 0xFF, 0, 0, seg.us_per_quarter});
    }
    for (const Note& n : seq.notes) {
        if (!note_in_range(n)) throw ArgumentError("note out of range");
        std::int64_t on = tempo.seconds_to_tick(n.start);
        std::int64_t off = std::max(tempo.seconds_to_tick(n.end), on + 1);
        events.push_back({on, 2, 0x90, static_cast<std::uint8_t>(n.pitch), static_cast<std::uint8_t>(n.velocity), 0});
        events.push_back({off, 1, 0x80, static_cast<std::uint8_t>(n.pitch), 0, 0});
    }
    std::stable_sort(events.begin(), events.end(), [](const auto& x, const auto& y) {
        if (x.tick != y.tick) return x.tick < y.tick;
        return x.order < y.order;
    });

    std::vector<std::uint8_t> track;
    std::int64_t at = 0;
    for (const auto& ev : events) {
        detail::put_vlq(track, ev.tick - at);
        at = ev.tick;
        if (ev.order == 0) {
            track.push_back(0xFF);
            track.push_back(0x51);
            track.push_back(0x03);
            track.push_back(static_cast<std::uint8_t>(ev.tempo_us >> 16));
            track.push_back(static_cast<std::uint8_t>(ev.tempo_us >> 8));
            track.push_back(static_cast<std::uint8_t>(ev.tempo_us));
        } else {
            track.push_back(ev.status);
            track.push_back(ev.a);
            track.push_back(ev.b);
        }
    }
    detail::put_vlq(track, 0);
    track.push_back(0xFF);
    track.push_back(0x2F);
    track.push_back(0x00);

    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'M', 'T', 'h', 'd'});
    detail::put_u32be(out, 6);
    detail::put_u16be(out, 0);  // format 0
    detail::put_u16be(out, 1);
    detail::put_u16be(out, static_cast<std::uint16_t>(tempo.ticks_per_quarter));
    out.insert(out.end(), {'M', 'T', 'r', 'k'});
    detail::put_u32be(out, static_cast<std::uint32_t>(track.size()));
    out.insert(out.end(), track.begin(), track.end());
    return out;
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write file: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write: " + path.string());
}

inline SmfData load_smf(const std::filesystem::path& path) {
    auto bytes = read_file(path);
    return parse_smf(bytes);
}

}  // namespace clarinet::midi
