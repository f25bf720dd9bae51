#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "clarinet/error.hpp"
#include "clarinet/melody.hpp"
#include "clarinet/midi.hpp"
#include "clarinet/normalize.hpp"
#include "clarinet/notes.hpp"
#include "clarinet/similarity.hpp"

namespace clarinet::retrieval {

inline constexpr int kIndexFormatVersion = 1;

enum class Extractor { Skyline, ModifiedSkyline };

inline const char* to_string(Extractor e) {
    return e == Extractor::Skyline ? "skyline" : "modified-skyline";
}

inline Extractor extractor_from_string(const std::string& s) {
    if (s == "skyline") return Extractor::Skyline;
    if (s == "modified-skyline" || s == "modified") return Extractor::ModifiedSkyline;
    throw ArgumentError("unknown extractor: " + s);
}

enum class TempoSource { File, Estimate, Fixed };

inline std::string to_string(TempoSource t, double fixed_bpm) {
    switch (t) {
        case TempoSource::File: return "file";
        case TempoSource::Estimate: return "estimate";
        default: return "fixed:" + std::to_string(fixed_bpm);
    }
}

/// Everything that shapes document melodies at build time. Queries are run
/// through the same configuration so scores stay comparable.
struct BuildConfig {
    Extractor extractor = Extractor::ModifiedSkyline;
    std::string criteria = "pitch";
    bool processed = false;
    double clip_len_s = 20.0;
    TempoSource tempo_source = TempoSource::File;
    double fixed_bpm = 120.0;

    friend bool operator==(const BuildConfig&, const BuildConfig&) = default;
};

inline TempoSource tempo_source_from_string(const std::string& s, double* fixed_bpm) {
    if (s == "file") return TempoSource::File;
    if (s == "estimate") return TempoSource::Estimate;
    if (s.rfind("fixed:", 0) == 0) {
        try {
            *fixed_bpm = std::stod(s.substr(6));
            return TempoSource::Fixed;
        } catch (const std::exception&) {
        }
    }
    throw ArgumentError("unknown tempo source: " + s + " (expected file, estimate, or fixed:<bpm>)");
}

struct DocumentInfo {
    double tempo_bpm = 0.0;  // 0 when unprocessed
    int key_tonic = -1;      // -1 when unprocessed
    std::string key_mode;
    std::string extractor;
    bool processed = false;
};

struct Document {
    std::string id;
    std::string source_path;
    similarity::SymbolSequence melody;
    double duration_s = 0.0;
    DocumentInfo info;
};

struct Index {
    std::vector<Document> documents;
    BuildConfig build_config;
};

struct PipelineOutput {
    similarity::SymbolSequence melody;
    DocumentInfo info;
};

/// Melody extraction plus optional processing (tempo units, transposition to
/// the C reference), shared by index building and query answering.
inline PipelineOutput run_pipeline(const NoteSequence& raw, const midi::TempoMap* file_tempo,
                                   const BuildConfig& cfg) {
    PipelineOutput out;
    out.info.extractor = to_string(cfg.extractor);
    out.info.processed = cfg.processed;

    NoteSequence extracted = cfg.extractor == Extractor::Skyline
                                 ? melody::skyline(raw)
                                 : melody::modified_skyline(raw, melody::Criteria::parse(cfg.criteria));
    if (extracted.empty()) return out;

    if (!cfg.processed) {
        out.melody = similarity::encode_pitch_string(extracted);
        return out;
    }

    normalize::Tempo tempo{};
    switch (cfg.tempo_source) {
        case TempoSource::Fixed:
            tempo = normalize::make_tempo(cfg.fixed_bpm);
            break;
        case TempoSource::File:
            tempo = normalize::make_tempo(file_tempo ? file_tempo->initial_bpm() : 120.0);
            break;
        case TempoSource::Estimate:
            try {
                tempo = normalize::estimate_tempo(extracted);
            } catch (const EstimationError&) {
                tempo = normalize::make_tempo(file_tempo ? file_tempo->initial_bpm() : 120.0);
            }
            break;
    }
    normalize::Key key = normalize::detect_key(extracted);
    out.info.tempo_bpm = tempo.bpm;
    out.info.key_tonic = key.tonic;
    out.info.key_mode = normalize::to_string(key.mode);
    out.melody = similarity::encode_pitch_string(normalize::transpose_to_reference(extracted, key), tempo);
    return out;
}

struct SkipEntry {
    std::string path;
    std::string reason;
};

struct BuildResult {
    Index index;
    std::vector<SkipEntry> skipped;
};

/// Stable document id for a file: its stem, suffixed on collision. The query
/// generator and the index builder must agree on this rule.
inline std::string assign_doc_id(const std::filesystem::path& path, const std::vector<std::string>& taken) {
    std::string id = path.stem().string();
    auto used = [&](const std::string& candidate) {
        return std::find(taken.begin(), taken.end(), candidate) != taken.end();
    };
    for (int suffix = 2; used(id); ++suffix) id = path.stem().string() + "-" + std::to_string(suffix);
    return id;
}

/// Parse, clip from t=0, extract, optionally process and encode each file.
/// Unreadable files are reported in the skip list, not fatal; an empty result
/// set is an error.
inline BuildResult build_index(const std::vector<std::filesystem::path>& paths, const BuildConfig& cfg) {
    BuildResult result;
    result.index.build_config = cfg;
    std::vector<std::string> ids;
    for (const auto& path : paths) {
        try {
            midi::SmfData smf = midi::load_smf(path);
            NoteSequence clipped = clip(smf.sequence, 0.0, cfg.clip_len_s);
            if (clipped.empty()) throw Error("no notes in the first " + std::to_string(cfg.clip_len_s) + " s");
            PipelineOutput piped = run_pipeline(clipped, &smf.tempo, cfg);
            if (piped.melody.empty()) throw Error("melody extraction produced no notes");

            std::string id = assign_doc_id(path, ids);
            ids.push_back(id);
            result.index.documents.push_back(Document{id, path.string(), std::move(piped.melody),
                                                      clipped.duration(), piped.info});
        } catch (const std::exception& e) {
            result.skipped.push_back({path.string(), e.what()});
        }
    }
    if (result.index.documents.empty()) {
        throw IndexError(IndexFault::Empty, "index build produced no documents");
    }
    return result;
}

namespace detail {

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string checksum_hex(std::string_view payload) {
    static const char* digits = "0123456789abcdef";
    std::uint64_t h = fnv1a64(payload);
    std::string out = "fnv1a64:";
    for (int i = 15; i >= 0; --i) out.push_back(digits[(h >> (i * 4)) & 0xF]);
    return out;
}

inline nlohmann::json config_to_json(const BuildConfig& cfg) {
    return {{"extractor", to_string(cfg.extractor)},
            {"criteria", cfg.criteria},
            {"processed", cfg.processed},
            {"clip_len_s", cfg.clip_len_s},
            {"tempo_source", to_string(cfg.tempo_source, cfg.fixed_bpm)}};
}

inline BuildConfig config_from_json(const nlohmann::json& j) {
    BuildConfig cfg;
    cfg.extractor = extractor_from_string(j.at("extractor").get<std::string>());
    cfg.criteria = j.at("criteria").get<std::string>();
    cfg.processed = j.at("processed").get<bool>();
    cfg.clip_len_s = j.at("clip_len_s").get<double>();
    cfg.tempo_source = tempo_source_from_string(j.at("tempo_source").get<std::string>(), &cfg.fixed_bpm);
    return cfg;
}

inline nlohmann::json payload_json(const Index& index) {
    nlohmann::json docs = nlohmann::json::array();
    for (const Document& d : index.documents) {
        nlohmann::json symbols = nlohmann::json::array();
        for (const auto& s : d.melody.symbols) {
            nlohmann::json units;
            if (s.duration_units) units = *s.duration_units;
            symbols.push_back(nlohmann::json::array({s.pitch, units, s.start_s, s.end_s}));
        }
        docs.push_back({{"id", d.id},
                        {"source_path", d.source_path},
                        {"duration_s", d.duration_s},
                        {"melody", {{"with_durations", d.melody.with_durations}, {"symbols", symbols}}},
                        {"metadata",
                         {{"tempo_bpm", d.info.tempo_bpm},
                          {"key_tonic", d.info.key_tonic},
                          {"key_mode", d.info.key_mode},
                          {"extractor", d.info.extractor},
                          {"processed", d.info.processed}}}});
    }
    return {{"format_version", kIndexFormatVersion},
            {"build_config", config_to_json(index.build_config)},
            {"documents", docs}};
}

}  // namespace detail

inline void save_index(const Index& index, const std::filesystem::path& path) {
    nlohmann::json payload = detail::payload_json(index);
    nlohmann::json file = payload;
    file["checksum"] = detail::checksum_hex(payload.dump());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write index file: " + path.string());
    out << file.dump(2) << "\n";
    if (!out) throw Error("short write: " + path.string());
}

inline Index load_index(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IndexError(IndexFault::Corrupt, "cannot open index file: " + path.string());
    nlohmann::json file;
    try {
        in >> file;
    } catch (const nlohmann::json::exception& e) {
        throw IndexError(IndexFault::Corrupt, "unreadable index file: " + std::string(e.what()));
    }

    try {
        int version = file.at("format_version").get<int>();
        if (version != kIndexFormatVersion) {
            throw IndexError(IndexFault::Version, "index format version " + std::to_string(version) +
                                                      " is not supported (expected " +
                                                      std::to_string(kIndexFormatVersion) + ")");
        }
        std::string recorded = file.at("checksum").get<std::string>();
        nlohmann::json payload = file;
        payload.erase("checksum");
        if (detail::checksum_hex(payload.dump()) != recorded) {
            throw IndexError(IndexFault::Checksum, "index checksum mismatch: " + path.string());
        }

        Index index;
        index.build_config = detail::config_from_json(file.at("build_config"));
        for (const auto& jd : file.at("documents")) {
            Document d;
            d.id = jd.at("id").get<std::string>();
            d.source_path = jd.at("source_path").get<std::string>();
            d.duration_s = jd.at("duration_s").get<double>();
            const auto& jm = jd.at("melody");
            d.melody.with_durations = jm.at("with_durations").get<bool>();
            for (const auto& js : jm.at("symbols")) {
                similarity::Symbol s;
                s.pitch = js.at(0).get<int>();
                if (!js.at(1).is_null()) s.duration_units = js.at(1).get<double>();
                s.start_s = js.at(2).get<double>();
                s.end_s = js.at(3).get<double>();
                d.melody.symbols.push_back(s);
            }
            const auto& ji = jd.at("metadata");
            d.info.tempo_bpm = ji.at("tempo_bpm").get<double>();
            d.info.key_tonic = ji.at("key_tonic").get<int>();
            d.info.key_mode = ji.at("key_mode").get<std::string>();
            d.info.extractor = ji.at("extractor").get<std::string>();
            d.info.processed = ji.at("processed").get<bool>();
            index.documents.push_back(std::move(d));
        }
        return index;
    } catch (const IndexError&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw IndexError(IndexFault::Corrupt, "malformed index file: " + std::string(e.what()));
    }
}

enum class Method { Boolean, RsaTime, RsaNote, MongeauSankoff };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::Boolean: return "boolean";
        case Method::RsaTime: return "rsa-time";
        case Method::RsaNote: return "rsa-note";
        default: return "mongeau-sankoff";
    }
}

inline Method method_from_string(const std::string& s) {
    if (s == "boolean") return Method::Boolean;
    if (s == "rsa-time") return Method::RsaTime;
    if (s == "rsa-note") return Method::RsaNote;
    if (s == "mongeau-sankoff") return Method::MongeauSankoff;
    throw ArgumentError("unknown method: " + s +
                        " (expected boolean, rsa-time, rsa-note, or mongeau-sankoff)");
}

struct QueryParams {
    similarity::RsaParams rsa;
    similarity::MsWeights ms;
};

/// Reads Mongeau-Sankoff weights from a JSON file; absent keys keep defaults.
inline similarity::MsWeights load_ms_weights(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open weight file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed weight file " + path.string() + ": " + e.what());
    }
    similarity::MsWeights w;
    if (j.contains("insert_delete_base")) w.insert_delete_base = j["insert_delete_base"].get<double>();
    if (j.contains("interval_costs")) {
        auto costs = j["interval_costs"].get<std::vector<double>>();
        if (costs.size() != w.interval_costs.size()) {
            throw Error("weight file must list 7 interval costs (classes 0..6)");
        }
        std::copy(costs.begin(), costs.end(), w.interval_costs.begin());
    }
    if (j.contains("fragmentation_base")) w.fragmentation_base = j["fragmentation_base"].get<double>();
    if (j.contains("duration_coeff")) w.duration_coeff = j["duration_coeff"].get<double>();
    if (j.contains("duration_cap")) w.duration_cap = j["duration_cap"].get<double>();
    if (j.contains("max_span")) w.max_span = j["max_span"].get<std::size_t>();
    w.validate();
    return w;
}

struct RankedEntry {
    std::string doc_id;
    similarity::SimilarityScore score;
};

/// Full descending ranking over every indexed document.
struct RankedResult {
    std::string query_id;
    Method method = Method::RsaNote;
    QueryParams params;
    double elapsed_s = 0.0;
    std::vector<RankedEntry> entries;

    /// 1-based rank of a document, 0 when absent.
    std::size_t rank_of(const std::string& doc_id) const {
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (entries[i].doc_id == doc_id) return i + 1;
        }
        return 0;
    }
};

namespace detail {

inline similarity::SimilarityScore score_one(const similarity::SymbolSequence& query,
                                             const similarity::SymbolSequence& doc, Method method,
                                             const QueryParams& params) {
    switch (method) {
        case Method::Boolean: {
            bool hit = similarity::boolean_match(query, doc);
            double len = static_cast<double>(query.size());
            return similarity::SimilarityScore{hit ? 1.0 : 0.0, hit ? 0.0 : len, 0.0};
        }
        case Method::RsaTime:
            return similarity::rsa_time(query, doc, params.rsa);
        case Method::RsaNote:
            return similarity::rsa_note(query, doc, params.rsa);
        default:
            return similarity::ms_similarity(query, doc, params.ms, params.rsa);
    }
}

}  // namespace detail

/// Scores every document with the chosen similarity method. The raw query runs
/// through the index's own build pipeline, so query-side processing always
/// mirrors the corpus. Results are independent of `jobs`.
inline RankedResult query(const Index& index, const NoteSequence& raw_query, Method method,
                          const QueryParams& params, int jobs = 1, std::string query_id = "") {
    if (method == Method::MongeauSankoff && !index.build_config.processed) {
        throw IndexError(IndexFault::Mismatch,
                         "mongeau-sankoff needs music-unit durations; this index was built without "
                         "--process, rebuild it with processing enabled");
    }
    if (raw_query.empty()) throw ArgumentError("query: empty note sequence");

    PipelineOutput piped = run_pipeline(raw_query, nullptr, index.build_config);
    if (piped.melody.empty()) throw ArgumentError("query melody is empty after extraction");

    auto t0 = std::chrono::steady_clock::now();
    std::vector<similarity::SimilarityScore> scores(index.documents.size());
    auto score_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            scores[i] = detail::score_one(piped.melody, index.documents[i].melody, method, params);
        }
    };
    if (jobs <= 1 || index.documents.size() < 2) {
        score_range(0, index.documents.size());
    } else {
        std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), index.documents.size());
        std::vector<std::thread> pool;
        pool.reserve(workers);
        std::size_t chunk = (index.documents.size() + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            std::size_t lo = w * chunk;
            std::size_t hi = std::min(lo + chunk, index.documents.size());
            if (lo < hi) pool.emplace_back(score_range, lo, hi);
        }
        for (auto& t : pool) t.join();
    }

    RankedResult result;
    result.query_id = std::move(query_id);
    result.method = method;
    result.params = params;
    result.entries.reserve(index.documents.size());
    for (std::size_t i = 0; i < index.documents.size(); ++i) {
        result.entries.push_back({index.documents[i].id, scores[i]});
    }
    std::sort(result.entries.begin(), result.entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
        if (a.score.value != b.score.value) return a.score.value > b.score.value;
        return a.doc_id < b.doc_id;
    });
    result.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

/// MIDI files directly inside `dir`, sorted by filename for determinism.
inline std::vector<std::filesystem::path> scan_midi_files(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw ArgumentError("not a directory: " + dir.string());
    std::vector<std::filesystem::path> paths;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".mid" || ext == ".midi") paths.push_back(entry.path());
    }
    std::sort(paths.begin(), paths.end());
    return paths;
}

}  // namespace clarinet::retrieval
