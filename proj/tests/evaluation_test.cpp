#include <doctest.h>

#include <fstream>
#include <random>

#include "clarinet/evaluation.hpp"
#include "support/synth.hpp"

using namespace clarinet;
using namespace clarinet::evaluation;

namespace {

std::vector<CorpusDoc> small_corpus(int n, std::uint64_t seed, double doc_len = 20.0) {
    std::vector<CorpusDoc> corpus;
    for (int i = 0; i < n; ++i) {
        synth::SongConfig cfg;
        cfg.seed = seed + static_cast<std::uint64_t>(i);
        cfg.length_s = doc_len + 2.0;
        char id[16];
        std::snprintf(id, sizeof id, "doc%02d", i);
        corpus.push_back({id, clip(synth::song(cfg), 0.0, doc_len)});
    }
    return corpus;
}

retrieval::RankedResult fake_result(const std::vector<std::pair<std::string, double>>& scored) {
    retrieval::RankedResult r;
    for (const auto& [id, score] : scored) {
        r.entries.push_back({id, similarity::SimilarityScore{score, 0.0, 0.0}});
    }
    return r;
}

}  // namespace

TEST_CASE("query generation is reproducible and in bounds") {
    auto corpus = small_corpus(6, 100);
    QuerySet a = generate_queries(corpus, 40, 5.0, 42);
    QuerySet b = generate_queries(corpus, 40, 5.0, 42);
    REQUIRE(a.queries.size() == 40);
    for (std::size_t i = 0; i < a.queries.size(); ++i) {
        CHECK(a.queries[i].source_doc_id == b.queries[i].source_doc_id);
        CHECK(a.queries[i].start_s == b.queries[i].start_s);
        CHECK(a.queries[i].notes.notes == b.queries[i].notes.notes);
        CHECK(a.queries[i].start_s >= 0.0);
        CHECK(a.queries[i].start_s <= 15.0 + 1e-9);  // 20 s docs, 5 s clips
        CHECK(a.queries[i].len_s == 5.0);
    }
    QuerySet c = generate_queries(corpus, 40, 5.0, 43);
    bool differs = false;
    for (std::size_t i = 0; i < a.queries.size(); ++i) {
        differs = differs || a.queries[i].start_s != c.queries[i].start_s;
    }
    CHECK(differs);
}

TEST_CASE("clip length equal to document length pins start at zero") {
    auto corpus = small_corpus(2, 101, 10.0);
    double dur = corpus[0].notes.duration();
    QuerySet qs = generate_queries({corpus[0]}, 5, dur, 7);
    for (const auto& q : qs.queries) CHECK(q.start_s == 0.0);
}

TEST_CASE("query generation fails when every document is too short") {
    auto corpus = small_corpus(2, 102, 3.0);
    CHECK_THROWS_AS(generate_queries(corpus, 4, 60.0, 1), ArgumentError);
    CHECK_THROWS_AS(generate_queries({}, 4, 5.0, 1), ArgumentError);
}

TEST_CASE("recall@k counts truths within the cutoff") {
    std::vector<std::size_t> ranks = {1, 2, 1};
    CHECK(recall_at_k(ranks, 1) == doctest::Approx(2.0 / 3.0));
    CHECK(recall_at_k(ranks, 2) == doctest::Approx(1.0));
    std::vector<std::size_t> perfect = {1, 1, 1, 1};
    for (std::size_t k : {1, 3, 5, 10}) CHECK(recall_at_k(perfect, k) == 1.0);
    CHECK_THROWS_AS(recall_at_k(ranks, 0), ArgumentError);
}

TEST_CASE("recall@k never decreases in k") {
    std::mt19937_64 rng(61);
    for (int iter = 0; iter < 100; ++iter) {
        std::vector<std::size_t> ranks;
        for (int i = 0; i < 20; ++i) ranks.push_back(rng() % 12);  // 0 = miss
        double prev = 0.0;
        for (std::size_t k = 1; k <= 12; ++k) {
            double r = recall_at_k(ranks, k);
            CHECK(r >= prev);
            prev = r;
        }
        CHECK(recall_at_k(ranks, 1) <= mrr(ranks));
        CHECK(mrr(ranks) <= recall_at_k(ranks, 12));
    }
}

TEST_CASE("mrr averages reciprocal ranks") {
    std::vector<std::size_t> ranks = {1, 2, 4};
    CHECK(mrr(ranks) == doctest::Approx(7.0 / 12.0));
    std::vector<std::size_t> all_first = {1, 1, 1};
    CHECK(mrr(all_first) == 1.0);
}

TEST_CASE("margin of discrimination is the gap to the best other document") {
    CHECK(margin_of_discrimination(fake_result({{"t", 0.9}, {"x", 0.7}}), "t") == doctest::Approx(0.2));
    CHECK(margin_of_discrimination(fake_result({{"t", 0.8}, {"x", 0.8}}), "t") == doctest::Approx(0.0));
    CHECK(margin_of_discrimination(fake_result({{"x", 0.8}, {"t", 0.7}}), "t") == doctest::Approx(-0.1));
    CHECK(margin_of_discrimination(fake_result({{"t", 0.6}}), "t") == doctest::Approx(0.6));
    CHECK_THROWS_AS(margin_of_discrimination(fake_result({{"x", 0.8}}), "t"), ArgumentError);
}

TEST_CASE("benchmark aggregates a single row from a single query") {
    synth::TempDir dir("clarinet-bench1");
    auto paths = synth::write_corpus(dir.path, 4, 103);
    retrieval::Index index = retrieval::build_index(paths, retrieval::BuildConfig{}).index;
    auto corpus = corpus_from_index(index);
    QuerySet qs = generate_queries(corpus, 1, 5.0, 9);

    EvalReport report = run_benchmark(index, qs, {{retrieval::Method::RsaNote, {}}});
    REQUIRE(report.rows.size() == 1);
    REQUIRE(report.details.size() == 1);
    const MethodRow& row = report.rows[0];
    const QueryDetail& d = report.details[0];
    CHECK(row.method == "rsa-note");
    CHECK(row.extractor == "modified-skyline");
    CHECK(row.processed == "unprocessed");
    CHECK(row.recall1 == (d.rank == 1 ? 1.0 : 0.0));
    CHECK(row.mrr == doctest::Approx(d.rank ? 1.0 / static_cast<double>(d.rank) : 0.0));
    CHECK(row.md_mean == doctest::Approx(d.md));
    CHECK(row.time_per_query_s == doctest::Approx(d.elapsed_s));
}

TEST_CASE("benchmark rejects an empty grid or query set") {
    synth::TempDir dir("clarinet-bench2");
    auto paths = synth::write_corpus(dir.path, 1, 104);
    retrieval::Index index = retrieval::build_index(paths, retrieval::BuildConfig{}).index;
    QuerySet qs;
    qs.queries.push_back({"q0", "song00", 0.0, 5.0, clip(synth::song({104, 22.0, false}), 0.0, 5.0)});
    CHECK_THROWS_AS(run_benchmark(index, qs, {}), ArgumentError);
    CHECK_THROWS_AS(run_benchmark(index, QuerySet{}, {{retrieval::Method::RsaNote, {}}}), ArgumentError);
}

TEST_CASE("a failing query is recorded without aborting the run") {
    synth::TempDir dir("clarinet-bench3");
    auto paths = synth::write_corpus(dir.path, 2, 105);
    retrieval::Index index = retrieval::build_index(paths, retrieval::BuildConfig{}).index;
    auto corpus = corpus_from_index(index);
    QuerySet qs = generate_queries(corpus, 2, 5.0, 11);
    qs.queries[0].notes = NoteSequence{};  // this one cannot be extracted

    EvalReport report = run_benchmark(index, qs, {{retrieval::Method::RsaNote, {}}});
    REQUIRE(report.details.size() == 2);
    CHECK(!report.details[0].error.empty());
    CHECK(report.details[0].rank == 0);
    CHECK(report.details[1].error.empty());
    CHECK(report.rows[0].recall1 <= 0.5);  // the failure counts as a miss
}

TEST_CASE("csv report begins with the documented header") {
    EvalReport report;
    MethodRow row;
    row.method = "rsa-note";
    row.extractor = "skyline";
    row.processed = "unprocessed";
    row.recall1 = row.recall3 = row.recall5 = row.recall10 = 1.0;
    row.mrr = 1.0;
    row.md_mean = 0.25;
    row.time_per_query_s = 0.001;
    report.rows.push_back(row);
    std::string csv = report_csv(report);
    CHECK(csv.rfind("method,extractor,processed,recall@1,recall@3,recall@5,recall@10,mrr,md_mean,"
                    "time_per_query_s\n", 0) == 0);
    CHECK(csv.find("rsa-note,skyline,unprocessed,1.000000") != std::string::npos);
}

TEST_CASE("json report mirrors rows and per-query details") {
    synth::TempDir dir("clarinet-bench4");
    auto paths = synth::write_corpus(dir.path, 2, 106);
    retrieval::Index index = retrieval::build_index(paths, retrieval::BuildConfig{}).index;
    auto corpus = corpus_from_index(index);
    QuerySet qs = generate_queries(corpus, 3, 5.0, 12);
    EvalReport report =
        run_benchmark(index, qs, {{retrieval::Method::RsaNote, {}}, {retrieval::Method::RsaTime, {}}});
    nlohmann::json j = report_json(report);
    CHECK(j["methods"].size() == 2);
    CHECK(j["queries"].size() == 6);
    for (const char* key : {"method", "query_id", "truth_id", "rank", "truth_score", "md",
                            "elapsed_s", "error"}) {
        CHECK(j["queries"][0].contains(key));
    }
}

TEST_CASE("query sets survive a save/load round trip") {
    synth::TempDir dir("clarinet-qs");
    auto corpus = small_corpus(3, 107);
    QuerySet qs = generate_queries(corpus, 5, 5.0, 77);
    auto file = dir.path / "q.json";
    save_queryset(qs, file);
    QuerySet back = load_queryset(file);
    CHECK(back.seed == qs.seed);
    CHECK(back.clip_len_s == qs.clip_len_s);
    REQUIRE(back.queries.size() == qs.queries.size());
    for (std::size_t i = 0; i < qs.queries.size(); ++i) {
        CHECK(back.queries[i].query_id == qs.queries[i].query_id);
        CHECK(back.queries[i].source_doc_id == qs.queries[i].source_doc_id);
        CHECK(back.queries[i].notes.notes == qs.queries[i].notes.notes);
    }
    CHECK_THROWS(load_queryset(dir.path / "missing.json"));
}

TEST_CASE("exact clips with rsa-note stride 1 always give non-negative margins") {
    synth::TempDir dir("clarinet-md");
    auto paths = synth::write_corpus(dir.path, 10, 108);
    retrieval::Index index = retrieval::build_index(paths, retrieval::BuildConfig{}).index;
    auto corpus = corpus_from_index(index);
    QuerySet qs = generate_queries(corpus, 15, 5.0, 13);
    EvalReport report = run_benchmark(index, qs, {{retrieval::Method::RsaNote, {}}});
    for (const auto& d : report.details) {
        REQUIRE(d.error.empty());
        CHECK(d.md >= 0.0);
    }
}
