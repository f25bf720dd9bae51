#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "clarinet/evaluation.hpp"
#include "clarinet/melody.hpp"
#include "clarinet/midi.hpp"
#include "clarinet/normalize.hpp"
#include "clarinet/retrieval.hpp"

namespace {

using namespace clarinet;

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("CLARINET_LOG");
        std::string v = env ? env : "warn";
        if (v == "error") return LogLevel::Error;
        if (v == "info") return LogLevel::Info;
        if (v == "debug") return LogLevel::Debug;
        return LogLevel::Warn;
    }();
    return level;
}

void logmsg(LogLevel level, const std::string& msg) {
    if (level > log_level()) return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::fprintf(stderr, "[clarinet:%s] %s\n", names[static_cast<int>(level)], msg.c_str());
}

/// Bad option values detected after CLI11 parsing (e.g. from a config file).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

nlohmann::json load_config(const std::string& path) {
    if (path.empty()) return nlohmann::json::object();
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file: " + path);
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("malformed config file " + path + ": " + e.what());
    }
}

// Precedence: flags > config file > defaults. A config value only lands when
// the flag was not given on the command line.
template <typename T>
void config_override(CLI::App* cmd, const nlohmann::json& section, const std::string& name, T* var) {
    if (!section.contains(name)) return;
    if (cmd->get_option("--" + name)->count() > 0) return;
    try {
        *var = section.at(name).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("config key \"" + name + "\": " + e.what());
    }
}

struct ExtractOpts {
    std::string input, output;
    std::string extractor = "modified-skyline";
    std::string criteria = "pitch";
    bool stability = false;
};

struct IndexOpts {
    std::string corpus_dir, output;
    double clip = 20.0;
    std::string extractor = "modified-skyline";
    std::string criteria = "pitch";
    bool process = false;
    std::string tempo_source = "file";
};

struct QueryOpts {
    std::string index_path, query_path;
    std::string method = "rsa-note";
    double window_time = 5.0;
    double stride_time = 1.0;
    std::size_t stride_notes = 1;
    std::string ms_weights;
    std::size_t top = 10;
    int jobs = 1;
};

struct GenQueriesOpts {
    std::string corpus_dir, output;
    std::size_t count = 40;
    double clip_len = 5.0;
    std::uint64_t seed = 42;
    double doc_clip = 20.0;
};

struct EvalOpts {
    std::vector<std::string> index_paths;
    std::string queryset;
    std::vector<double> generate;  // n, clip_len, seed
    std::string methods = "rsa-note,rsa-time";
    std::string output_prefix = "eval";
    double window_time = 5.0;
    double stride_time = 1.0;
    std::size_t stride_notes = 1;
    std::string ms_weights;
    int jobs = 1;
};

retrieval::BuildConfig make_build_config(const std::string& extractor, const std::string& criteria,
                                         bool process, double clip_len, const std::string& tempo_source) {
    retrieval::BuildConfig cfg;
    try {
        cfg.extractor = retrieval::extractor_from_string(extractor);
        melody::Criteria::parse(criteria);  // validated here, used inside the pipeline
        cfg.criteria = criteria;
        cfg.processed = process;
        cfg.clip_len_s = clip_len;
        cfg.tempo_source = retrieval::tempo_source_from_string(tempo_source, &cfg.fixed_bpm);
    } catch (const ArgumentError& e) {
        throw UsageError(e.what());
    }
    if (clip_len <= 0.0) throw UsageError("clip length must be positive");
    return cfg;
}

retrieval::QueryParams make_query_params(double window_time, double stride_time,
                                         std::size_t stride_notes, const std::string& ms_weights_path) {
    retrieval::QueryParams params;
    params.rsa.window_time = window_time;
    params.rsa.stride_time = stride_time;
    params.rsa.stride_notes = stride_notes;
    try {
        params.rsa.validate();
        if (!ms_weights_path.empty()) params.ms = retrieval::load_ms_weights(ms_weights_path);
    } catch (const ArgumentError& e) {
        throw UsageError(e.what());
    }
    return params;
}

int cmd_extract(const ExtractOpts& opts) {
    try {
        retrieval::extractor_from_string(opts.extractor);
        melody::Criteria::parse(opts.criteria);
    } catch (const ArgumentError& e) {
        throw UsageError(e.what());
    }

    midi::SmfData smf = midi::load_smf(opts.input);
    NoteSequence extracted = retrieval::extractor_from_string(opts.extractor) == retrieval::Extractor::Skyline
                                 ? melody::skyline(smf.sequence)
                                 : melody::modified_skyline(smf.sequence, melody::Criteria::parse(opts.criteria));
    midi::write_file(opts.output, midi::write_smf(extracted, smf.tempo));
    logmsg(LogLevel::Info, "wrote " + std::to_string(extracted.size()) + " melody notes to " + opts.output);

    if (opts.stability) {
        melody::StabilityReport report = melody::stability(extracted);
        nlohmann::json j = {{"mean_duration", report.mean_duration},
                            {"duration_cv", report.duration_cv},
                            {"short_note_count", report.short_note_count},
                            {"note_count", report.note_count}};
        std::printf("%s\n", j.dump().c_str());
    }
    return 0;
}

int cmd_index(const IndexOpts& opts) {
    retrieval::BuildConfig cfg =
        make_build_config(opts.extractor, opts.criteria, opts.process, opts.clip, opts.tempo_source);
    auto paths = retrieval::scan_midi_files(opts.corpus_dir);
    retrieval::BuildResult result = retrieval::build_index(paths, cfg);
    for (const auto& skip : result.skipped) {
        logmsg(LogLevel::Warn, "skipped " + skip.path + ": " + skip.reason);
    }
    retrieval::save_index(result.index, opts.output);
    std::printf("indexed %zu documents (%zu skipped) -> %s\n", result.index.documents.size(),
                result.skipped.size(), opts.output.c_str());
    return 0;
}

int cmd_query(const QueryOpts& opts) {
    retrieval::Method method;
    try {
        method = retrieval::method_from_string(opts.method);
    } catch (const ArgumentError& e) {
        throw UsageError(e.what());
    }
    retrieval::QueryParams params =
        make_query_params(opts.window_time, opts.stride_time, opts.stride_notes, opts.ms_weights);

    retrieval::Index index = retrieval::load_index(opts.index_path);
    midi::SmfData smf = midi::load_smf(opts.query_path);
    retrieval::RankedResult result = retrieval::query(index, smf.sequence, method, params, opts.jobs);

    std::printf("%-5s %-32s %8s %10s\n", "rank", "document", "score", "offset");
    std::size_t rows = std::min<std::size_t>(opts.top, result.entries.size());
    for (std::size_t i = 0; i < rows; ++i) {
        const auto& e = result.entries[i];
        std::printf("%-5zu %-32s %8.3f %10.2f\n", i + 1, e.doc_id.c_str(), e.score.value,
                    e.score.best_window_offset);
    }
    logmsg(LogLevel::Info, "scored " + std::to_string(result.entries.size()) + " documents in " +
                               std::to_string(result.elapsed_s) + " s");
    return 0;
}

std::vector<evaluation::CorpusDoc> load_corpus_dir(const std::string& dir, double doc_clip) {
    auto paths = retrieval::scan_midi_files(dir);
    std::vector<evaluation::CorpusDoc> corpus;
    std::vector<std::string> ids;
    for (const auto& path : paths) {
        try {
            midi::SmfData smf = midi::load_smf(path);
            NoteSequence clipped = clip(smf.sequence, 0.0, doc_clip);
            if (clipped.empty()) throw Error("no notes in clip window");
            std::string id = retrieval::assign_doc_id(path, ids);
            ids.push_back(id);
            corpus.push_back({id, std::move(clipped)});
        } catch (const std::exception& e) {
            logmsg(LogLevel::Warn, "skipped " + path.string() + ": " + e.what());
        }
    }
    if (corpus.empty()) throw Error("no usable MIDI files in " + dir);
    return corpus;
}

int cmd_genqueries(const GenQueriesOpts& opts) {
    if (opts.count == 0) throw UsageError("count must be positive");
    if (opts.clip_len <= 0.0 || opts.doc_clip <= 0.0) throw UsageError("clip lengths must be positive");

    auto corpus = load_corpus_dir(opts.corpus_dir, opts.doc_clip);
    evaluation::QuerySet qs = evaluation::generate_queries(corpus, opts.count, opts.clip_len, opts.seed);
    evaluation::save_queryset(qs, opts.output);
    std::printf("wrote %zu queries (clip %.3g s, seed %llu) -> %s\n", qs.queries.size(), opts.clip_len,
                static_cast<unsigned long long>(opts.seed), opts.output.c_str());
    return 0;
}

int cmd_eval(const EvalOpts& opts) {
    std::vector<retrieval::Method> methods;
    try {
        std::string rest = opts.methods;
        while (!rest.empty()) {
            auto comma = rest.find(',');
            std::string name = rest.substr(0, comma);
            if (!name.empty()) methods.push_back(retrieval::method_from_string(name));
            rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
        }
    } catch (const ArgumentError& e) {
        throw UsageError(e.what());
    }
    if (methods.empty()) throw UsageError("method grid is empty");
    if (opts.queryset.empty() && opts.generate.empty()) {
        throw UsageError("either --queryset or --generate is required");
    }
    if (!opts.generate.empty() && opts.generate.size() != 3) {
        throw UsageError("--generate takes three values: count, clip seconds, seed");
    }
    retrieval::QueryParams params =
        make_query_params(opts.window_time, opts.stride_time, opts.stride_notes, opts.ms_weights);

    std::vector<retrieval::Index> indexes;
    for (const auto& path : opts.index_paths) indexes.push_back(retrieval::load_index(path));

    evaluation::QuerySet qs;
    if (!opts.queryset.empty()) {
        qs = evaluation::load_queryset(opts.queryset);
    } else {
        auto corpus = evaluation::corpus_from_index(indexes.front());
        qs = evaluation::generate_queries(corpus, static_cast<std::size_t>(opts.generate[0]),
                                          opts.generate[1], static_cast<std::uint64_t>(opts.generate[2]));
    }

    std::vector<evaluation::MethodSpec> specs;
    for (retrieval::Method m : methods) specs.push_back({m, params});

    evaluation::EvalReport report;
    for (const auto& index : indexes) {
        evaluation::EvalReport part = evaluation::run_benchmark(index, qs, specs, opts.jobs);
        report.rows.insert(report.rows.end(), part.rows.begin(), part.rows.end());
        report.details.insert(report.details.end(), part.details.begin(), part.details.end());
    }

    std::string csv_path = opts.output_prefix + ".csv";
    std::string json_path = opts.output_prefix + ".json";
    evaluation::write_text_file(csv_path, evaluation::report_csv(report));
    evaluation::write_text_file(json_path, evaluation::report_json(report).dump(2) + "\n");

    std::printf("%-16s %-18s %-12s %8s %8s %8s %8s %8s %8s %12s\n", "method", "extractor", "processed",
                "r@1", "r@3", "r@5", "r@10", "mrr", "md", "s/query");
    for (const auto& r : report.rows) {
        std::printf("%-16s %-18s %-12s %8.3f %8.3f %8.3f %8.3f %8.3f %8.3f %12.4f\n", r.method.c_str(),
                    r.extractor.c_str(), r.processed.c_str(), r.recall1, r.recall3, r.recall5, r.recall10,
                    r.mrr, r.md_mean, r.time_per_query_s);
    }
    std::printf("reports: %s %s\n", csv_path.c_str(), json_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"clarinet - melody-based MIDI music retrieval"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file; flags override its values");

    ExtractOpts ex;
    CLI::App* extract = app.add_subcommand("extract", "Extract a monophonic melody from a MIDI file");
    extract->add_option("input", ex.input, "input MIDI file")->required();
    extract->add_option("-o,--output", ex.output, "output MIDI file")->required();
    extract->add_option("--extractor", ex.extractor, "skyline | modified-skyline");
    extract->add_option("--criteria", ex.criteria, "pitch | velocity | weighted:a,b");
    extract->add_flag("--stability", ex.stability, "print a melody stability report as JSON");

    IndexOpts ix;
    CLI::App* index_cmd = app.add_subcommand("index", "Build a retrieval index from a MIDI corpus");
    index_cmd->add_option("corpus", ix.corpus_dir, "directory of MIDI files")->required();
    index_cmd->add_option("-o,--output", ix.output, "index file to write")->required();
    index_cmd->add_option("--clip", ix.clip, "document clip length in seconds");
    index_cmd->add_option("--extractor", ix.extractor, "skyline | modified-skyline");
    index_cmd->add_option("--criteria", ix.criteria, "importance criteria for modified-skyline");
    index_cmd->add_flag("--process", ix.process, "tempo-normalize durations and transpose to C");
    index_cmd->add_option("--tempo-source", ix.tempo_source, "file | estimate | fixed:<bpm>");

    QueryOpts qy;
    CLI::App* query_cmd = app.add_subcommand("query", "Rank indexed documents against a query MIDI");
    query_cmd->add_option("index", qy.index_path, "index file")->required();
    query_cmd->add_option("query", qy.query_path, "query MIDI file")->required();
    query_cmd->add_option("--method", qy.method, "boolean | rsa-time | rsa-note | mongeau-sankoff");
    query_cmd->add_option("--window-time", qy.window_time, "RSA time window T_0 in seconds");
    query_cmd->add_option("--stride-time", qy.stride_time, "RSA time stride T_S in seconds");
    query_cmd->add_option("--stride-notes", qy.stride_notes, "RSA note stride N_S");
    query_cmd->add_option("--ms-weights", qy.ms_weights, "JSON file of Mongeau-Sankoff weights");
    query_cmd->add_option("--top", qy.top, "rows to print");
    query_cmd->add_option("--jobs", qy.jobs, "worker threads for document scoring");

    GenQueriesOpts gq;
    CLI::App* gen_cmd = app.add_subcommand("genqueries", "Generate a seeded query set from a corpus");
    gen_cmd->add_option("corpus", gq.corpus_dir, "directory of MIDI files")->required();
    gen_cmd->add_option("-o,--output", gq.output, "query set JSON to write")->required();
    gen_cmd->add_option("--count", gq.count, "number of queries");
    gen_cmd->add_option("--clip-len", gq.clip_len, "query clip length in seconds");
    gen_cmd->add_option("--seed", gq.seed, "random seed");
    gen_cmd->add_option("--doc-clip", gq.doc_clip, "document clip length in seconds");

    EvalOpts ev;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Benchmark methods over one or more indexes");
    eval_cmd->add_option("index", ev.index_paths, "index file(s)")->required();
    eval_cmd->add_option("--queryset", ev.queryset, "query set JSON produced by genqueries");
    eval_cmd->add_option("--generate", ev.generate, "generate queries: count, clip seconds, seed")
        ->expected(3);
    eval_cmd->add_option("--methods", ev.methods, "comma-separated method list");
    eval_cmd->add_option("-o,--output", ev.output_prefix, "report path prefix (.csv/.json)");
    eval_cmd->add_option("--window-time", ev.window_time, "RSA time window T_0 in seconds");
    eval_cmd->add_option("--stride-time", ev.stride_time, "RSA time stride T_S in seconds");
    eval_cmd->add_option("--stride-notes", ev.stride_notes, "RSA note stride N_S");
    eval_cmd->add_option("--ms-weights", ev.ms_weights, "JSON file of Mongeau-Sankoff weights");
    eval_cmd->add_option("--jobs", ev.jobs, "worker threads per query (timing stays per-query wall clock)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        nlohmann::json config = load_config(config_path);
        if (*extract) {
            const auto& sec = config.value("extract", nlohmann::json::object());
            config_override(extract, sec, "extractor", &ex.extractor);
            config_override(extract, sec, "criteria", &ex.criteria);
            return cmd_extract(ex);
        }
        if (*index_cmd) {
            const auto& sec = config.value("index", nlohmann::json::object());
            config_override(index_cmd, sec, "clip", &ix.clip);
            config_override(index_cmd, sec, "extractor", &ix.extractor);
            config_override(index_cmd, sec, "criteria", &ix.criteria);
            config_override(index_cmd, sec, "tempo-source", &ix.tempo_source);
            return cmd_index(ix);
        }
        if (*query_cmd) {
            const auto& sec = config.value("query", nlohmann::json::object());
            config_override(query_cmd, sec, "method", &qy.method);
            config_override(query_cmd, sec, "window-time", &qy.window_time);
            config_override(query_cmd, sec, "stride-time", &qy.stride_time);
            config_override(query_cmd, sec, "stride-notes", &qy.stride_notes);
            config_override(query_cmd, sec, "ms-weights", &qy.ms_weights);
            config_override(query_cmd, sec, "top", &qy.top);
            config_override(query_cmd, sec, "jobs", &qy.jobs);
            return cmd_query(qy);
        }
        if (*gen_cmd) {
            const auto& sec = config.value("genqueries", nlohmann::json::object());
            config_override(gen_cmd, sec, "count", &gq.count);
            config_override(gen_cmd, sec, "clip-len", &gq.clip_len);
            config_override(gen_cmd, sec, "seed", &gq.seed);
            config_override(gen_cmd, sec, "doc-clip", &gq.doc_clip);
            return cmd_genqueries(gq);
        }
        if (*eval_cmd) {
            const auto& sec = config.value("eval", nlohmann::json::object());
            config_override(eval_cmd, sec, "methods", &ev.methods);
            config_override(eval_cmd, sec, "window-time", &ev.window_time);
            config_override(eval_cmd, sec, "stride-time", &ev.stride_time);
            config_override(eval_cmd, sec, "stride-notes", &ev.stride_notes);
            config_override(eval_cmd, sec, "ms-weights", &ev.ms_weights);
            config_override(eval_cmd, sec, "jobs", &ev.jobs);
            return cmd_eval(ev);
        }
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
