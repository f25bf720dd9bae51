#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "clarinet/error.hpp"
#include "clarinet/notes.hpp"
#include "clarinet/retrieval.hpp"

namespace clarinet::evaluation {

/// A corpus document as the query generator sees it: the raw clipped note
/// sequence under the same id the index uses.
struct CorpusDoc {
    std::string id;
    NoteSequence notes;
};

struct QueryRecord {
    std::string query_id;
    std::string source_doc_id;  // ground truth
    double start_s = 0.0;
    double len_s = 0.0;
    NoteSequence notes;
};

struct QuerySet {
    std::uint64_t seed = 0;
    double clip_len_s = 5.0;
    std::vector<QueryRecord> queries;
};

namespace detail {

// mt19937_64 output is pinned by the standard; scaling by hand keeps the
// stream identical across platforms, unlike std::uniform_real_distribution.
inline double unit_real(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    return static_cast<std::size_t>(rng() % n);
}

inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace detail

/// Samples n documents uniformly with replacement and clips `clip_len_s`
/// seconds starting at a uniform real offset. Fully reproducible from the seed.
inline QuerySet generate_queries(const std::vector<CorpusDoc>& corpus, std::size_t n,
                                 double clip_len_s, std::uint64_t seed) {
    if (corpus.empty()) throw ArgumentError("generate_queries: empty corpus");
    if (clip_len_s <= 0.0) throw ArgumentError("generate_queries: clip length must be positive");

    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (corpus[i].notes.duration() >= clip_len_s - 1e-9) eligible.push_back(i);
    }
    if (eligible.empty()) {
        throw ArgumentError("generate_queries: every document is shorter than the clip length");
    }

    QuerySet qs;
    qs.seed = seed;
    qs.clip_len_s = clip_len_s;
    std::mt19937_64 rng(seed);
    for (std::size_t q = 0; q < n; ++q) {
        const CorpusDoc& doc = corpus[eligible[detail::uniform_index(rng, eligible.size())]];
        double span = std::max(0.0, doc.notes.duration() - clip_len_s);
        double start = detail::unit_real(rng) * span;
        char id[32];
        std::snprintf(id, sizeof id, "q%03zu", q);
        qs.queries.push_back(
            {id, doc.id, start, clip_len_s, clip(doc.notes, start, start + clip_len_s)});
    }
    return qs;
}

/// Fraction of queries whose ground truth appears at rank <= k. Rank 0 marks a
/// missing truth or a failed query and never counts as found.
inline double recall_at_k(std::span<const std::size_t> truth_ranks, std::size_t k) {
    if (k < 1) throw ArgumentError("recall_at_k: k must be at least 1");
    if (truth_ranks.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t r : truth_ranks) {
        if (r >= 1 && r <= k) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(truth_ranks.size());
}

/// Mean of 1/rank over all queries; failed queries contribute 0.
inline double mrr(std::span<const std::size_t> truth_ranks) {
    if (truth_ranks.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t r : truth_ranks) {
        if (r >= 1) sum += 1.0 / static_cast<double>(r);
    }
    return sum / static_cast<double>(truth_ranks.size());
}

/// Similarity gap between the truth document and the best-ranked other
/// document; negative when the truth is not ranked first.
inline double margin_of_discrimination(const retrieval::RankedResult& result, const std::string& truth) {
    double truth_score = 0.0;
    bool found = false;
    double best_other = 0.0;
    bool has_other = false;
    for (const auto& entry : result.entries) {
        if (entry.doc_id == truth) {
            truth_score = entry.score.value;
            found = true;
        } else if (!has_other) {
            best_other = entry.score.value;  // entries are sorted descending
            has_other = true;
        }
        if (found && has_other) break;
    }
    if (!found) throw ArgumentError("margin_of_discrimination: truth document not in ranking");
    return has_other ? truth_score - best_other : truth_score;
}

struct MethodSpec {
    retrieval::Method method = retrieval::Method::RsaNote;
    retrieval::QueryParams params;
};

struct QueryDetail {
    std::string method;
    std::string query_id;
    std::string truth_id;
    std::size_t rank = 0;  // 0 = failed or truth missing
    double truth_score = 0.0;
    double md = 0.0;
    double elapsed_s = 0.0;
    std::string error;
};

struct MethodRow {
    std::string method;
    std::string extractor;
    std::string processed;  // "processed" | "unprocessed"
    double recall1 = 0.0, recall3 = 0.0, recall5 = 0.0, recall10 = 0.0;
    double mrr = 0.0;
    double md_mean = 0.0;
    double time_per_query_s = 0.0;
    std::size_t query_count = 0;
};

struct EvalReport {
    std::vector<MethodRow> rows;
    std::vector<QueryDetail> details;
};

/// Runs every (query, method) pair, recording wall-clock time per query.
/// Queries execute sequentially; `jobs` only widens per-query document scoring
/// and defaults to 1 so timings stay scheduler-independent. A single query
/// failure is recorded on its row and does not abort.
inline EvalReport run_benchmark(const retrieval::Index& index, const QuerySet& qs,
                                const std::vector<MethodSpec>& methods, int jobs = 1) {
    if (methods.empty()) throw ArgumentError("run_benchmark: empty method grid");
    if (qs.queries.empty()) throw ArgumentError("run_benchmark: empty query set");

    EvalReport report;
    for (const MethodSpec& spec : methods) {
        std::vector<std::size_t> ranks;
        ranks.reserve(qs.queries.size());
        double time_sum = 0.0, md_sum = 0.0;
        std::size_t timed = 0, md_count = 0;

        for (const QueryRecord& q : qs.queries) {
            QueryDetail detail;
            detail.method = retrieval::to_string(spec.method);
            detail.query_id = q.query_id;
            detail.truth_id = q.source_doc_id;
            try {
                retrieval::RankedResult res =
                    retrieval::query(index, q.notes, spec.method, spec.params, jobs, q.query_id);
                detail.rank = res.rank_of(q.source_doc_id);
                detail.elapsed_s = res.elapsed_s;
                time_sum += res.elapsed_s;
                ++timed;
                if (detail.rank >= 1) {
                    detail.truth_score = res.entries[detail.rank - 1].score.value;
                    detail.md = margin_of_discrimination(res, q.source_doc_id);
                    md_sum += detail.md;
                    ++md_count;
                }
            } catch (const std::exception& e) {
                detail.error = e.what();
            }
            ranks.push_back(detail.rank);
            report.details.push_back(std::move(detail));
        }

        MethodRow row;
        row.method = retrieval::to_string(spec.method);
        row.extractor = retrieval::to_string(index.build_config.extractor);
        row.processed = index.build_config.processed ? "processed" : "unprocessed";
        row.recall1 = recall_at_k(ranks, 1);
        row.recall3 = recall_at_k(ranks, 3);
        row.recall5 = recall_at_k(ranks, 5);
        row.recall10 = recall_at_k(ranks, 10);
        row.mrr = mrr(ranks);
        row.md_mean = md_count > 0 ? md_sum / static_cast<double>(md_count) : 0.0;
        row.time_per_query_s = timed > 0 ? time_sum / static_cast<double>(timed) : 0.0;
        row.query_count = qs.queries.size();
        report.rows.push_back(std::move(row));
    }
    return report;
}

inline constexpr const char* kCsvHeader =
    "method,extractor,processed,recall@1,recall@3,recall@5,recall@10,mrr,md_mean,time_per_query_s";

inline std::string report_csv(const EvalReport& report) {
    std::string out = kCsvHeader;
    out += "\n";
    for (const MethodRow& r : report.rows) {
        out += r.method + "," + r.extractor + "," + r.processed + "," + detail::fmt(r.recall1) + "," +
               detail::fmt(r.recall3) + "," + detail::fmt(r.recall5) + "," + detail::fmt(r.recall10) +
               "," + detail::fmt(r.mrr) + "," + detail::fmt(r.md_mean) + "," +
               detail::fmt(r.time_per_query_s) + "\n";
    }
    return out;
}

inline nlohmann::json report_json(const EvalReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const MethodRow& r : report.rows) {
        rows.push_back({{"method", r.method},
                        {"extractor", r.extractor},
                        {"processed", r.processed},
                        {"recall@1", r.recall1},
                        {"recall@3", r.recall3},
                        {"recall@5", r.recall5},
                        {"recall@10", r.recall10},
                        {"mrr", r.mrr},
                        {"md_mean", r.md_mean},
                        {"time_per_query_s", r.time_per_query_s},
                        {"query_count", r.query_count}});
    }
    nlohmann::json details = nlohmann::json::array();
    for (const QueryDetail& d : report.details) {
        details.push_back({{"method", d.method},
                           {"query_id", d.query_id},
                           {"truth_id", d.truth_id},
                           {"rank", d.rank},
                           {"truth_score", d.truth_score},
                           {"md", d.md},
                           {"elapsed_s", d.elapsed_s},
                           {"error", d.error}});
    }
    return {{"methods", rows}, {"queries", details}};
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write file: " + path.string());
    out << content;
    if (!out) throw Error("short write: " + path.string());
}

namespace detail {

inline nlohmann::json notes_json(const NoteSequence& seq) {
    nlohmann::json notes = nlohmann::json::array();
    for (const Note& n : seq.notes) {
        notes.push_back(nlohmann::json::array({n.pitch, n.velocity, n.start, n.end}));
    }
    return notes;
}

inline NoteSequence notes_from_json(const nlohmann::json& j) {
    std::vector<Note> notes;
    for (const auto& jn : j) {
        notes.push_back(Note{jn.at(0).get<int>(), jn.at(1).get<int>(), jn.at(2).get<double>(),
                             jn.at(3).get<double>()});
    }
    return make_sequence(std::move(notes));
}

}  // namespace detail

inline void save_queryset(const QuerySet& qs, const std::filesystem::path& path) {
    nlohmann::json queries = nlohmann::json::array();
    for (const QueryRecord& q : qs.queries) {
        queries.push_back({{"query_id", q.query_id},
                           {"source_doc_id", q.source_doc_id},
                           {"start_s", q.start_s},
                           {"len_s", q.len_s},
                           {"notes", detail::notes_json(q.notes)}});
    }
    nlohmann::json file = {{"seed", qs.seed}, {"clip_len_s", qs.clip_len_s}, {"queries", queries}};
    write_text_file(path, file.dump(2) + "\n");
}

inline QuerySet load_queryset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open query set: " + path.string());
    nlohmann::json file;
    try {
        in >> file;
        QuerySet qs;
        qs.seed = file.at("seed").get<std::uint64_t>();
        qs.clip_len_s = file.at("clip_len_s").get<double>();
        for (const auto& jq : file.at("queries")) {
            qs.queries.push_back({jq.at("query_id").get<std::string>(),
                                  jq.at("source_doc_id").get<std::string>(),
                                  jq.at("start_s").get<double>(), jq.at("len_s").get<double>(),
                                  detail::notes_from_json(jq.at("notes"))});
        }
        return qs;
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed query set " + path.string() + ": " + e.what());
    }
}

/// Rebuilds the raw corpus (parse + clip) from the documents of an index, so
/// query generation can run without a separate corpus listing.
inline std::vector<CorpusDoc> corpus_from_index(const retrieval::Index& index) {
    std::vector<CorpusDoc> corpus;
    corpus.reserve(index.documents.size());
    for (const auto& doc : index.documents) {
        midi::SmfData smf = midi::load_smf(doc.source_path);
        corpus.push_back({doc.id, clip(smf.sequence, 0.0, index.build_config.clip_len_s)});
    }
    return corpus;
}

}  // namespace clarinet::evaluation
