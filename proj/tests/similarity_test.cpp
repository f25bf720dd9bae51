#include <doctest.h>

#include <random>

#include "clarinet/similarity.hpp"
#include "support/oracles.hpp"

using namespace clarinet;
using namespace clarinet::similarity;
using oracles::as_processed;
using oracles::as_symbols;

TEST_CASE("encoding maps melody notes to pitch symbols in order") {
    CHECK(encode_pitch_string(NoteSequence{}).empty());

    NoteSequence seq = make_sequence(
        {Note{60, 80, 0.0, 0.4}, Note{64, 80, 0.5, 0.9}, Note{67, 80, 1.0, 1.4}});
    SymbolSequence s = encode_pitch_string(seq);
    CHECK(s.pitches() == std::vector<int>{60, 64, 67});
    CHECK(!s.with_durations);
    CHECK(s.symbols[1].start_s == 0.5);
}

TEST_CASE("processed encoding carries music-unit durations") {
    NoteSequence seq = make_sequence({Note{60, 80, 0.0, 0.5}});  // quarter note at 120 BPM
    SymbolSequence s = encode_pitch_string(seq, normalize::Tempo{120.0});
    CHECK(s.with_durations);
    CHECK(s.symbols[0].duration_units == doctest::Approx(16.0));
}

TEST_CASE("encoding rejects polyphonic input") {
    NoteSequence seq = make_sequence({Note{60, 80, 0.0, 1.0}, Note{70, 80, 0.5, 1.5}});
    CHECK_THROWS_AS(encode_pitch_string(seq), ArgumentError);
}

TEST_CASE("boolean match finds contiguous substrings only") {
    SymbolSequence d = as_symbols({65, 67, 60, 67, 55, 60});  // A B C B G C as pitches
    CHECK(boolean_match(as_symbols({60, 67, 55}), d));        // C B G
    CHECK(!boolean_match(as_symbols({65, 60, 67, 55}), d));   // A C B G: one extra note breaks it
    CHECK(boolean_match(SymbolSequence{}, d));                // empty query always matches
}

TEST_CASE("levenshtein handles the degenerate and hand-checked cases") {
    CHECK(levenshtein(as_symbols({60, 62, 64}), as_symbols({60, 62, 64})) == 0);
    CHECK(levenshtein(SymbolSequence{}, as_symbols({1, 2, 3, 4})) == 4);
    CHECK(levenshtein(as_symbols({1, 2, 3, 4}), SymbolSequence{}) == 4);
    // C,B,G vs A,C,B,G: one insertion
    std::vector<int> a = {60, 59, 55}, b = {57, 60, 59, 55};
    CHECK(levenshtein(std::span<const int>(a), std::span<const int>(b)) == 1);
    CHECK(oracles::lev_brute(a, b) == 1);
}

TEST_CASE("levenshtein equals the exponential recursion on small pairs") {
    std::mt19937_64 rng(31);
    for (int iter = 0; iter < 400; ++iter) {
        auto a = oracles::random_pitches(rng, rng() % 7, 4);
        auto b = oracles::random_pitches(rng, rng() % 7, 4);
        CHECK(levenshtein(std::span<const int>(a), std::span<const int>(b)) ==
              oracles::lev_brute(a, b));
    }
}

TEST_CASE("levenshtein is a metric") {
    std::mt19937_64 rng(32);
    for (int iter = 0; iter < 300; ++iter) {
        auto a = oracles::random_pitches(rng, rng() % 10, 5);
        auto b = oracles::random_pitches(rng, rng() % 10, 5);
        auto c = oracles::random_pitches(rng, rng() % 10, 5);
        std::span<const int> sa(a), sb(b), sc(c);
        int ab = levenshtein(sa, sb), ba = levenshtein(sb, sa);
        int bc = levenshtein(sb, sc), ac = levenshtein(sa, sc);
        CHECK(ab == ba);                      // symmetry
        CHECK(levenshtein(sa, sa) == 0);      // identity
        CHECK((ab == 0) == (a == b));         // separation
        CHECK(ac <= ab + bc);                 // triangle inequality
    }
}

TEST_CASE("rsa_time scores an exact self-match as 1") {
    SymbolSequence doc = as_symbols({60, 62, 64, 65, 67}, 0.5);
    RsaParams p{doc.duration(), 1.0, 1};
    SimilarityScore s = rsa_time(doc, doc, p);
    CHECK(s.value == 1.0);
    CHECK(s.raw_distance == 0.0);
    CHECK(s.best_window_offset == 0.0);
}

TEST_CASE("rsa_time recovers a clip at its true offset") {
    // 20 s of pitches at 0.5 s spacing; query is the [5, 10) clip
    std::vector<int> pitches;
    for (int i = 0; i < 40; ++i) pitches.push_back(40 + (i * 7) % 48);
    SymbolSequence doc = as_symbols(pitches, 0.5);
    SymbolSequence query;
    for (const Symbol& s : doc.symbols) {
        if (s.start_s >= 5.0 && s.start_s < 10.0) {
            query.symbols.push_back({s.pitch, s.start_s - 5.0, s.end_s - 5.0, std::nullopt});
        }
    }
    RsaParams p{5.0, 1.0, 1};
    SimilarityScore s = rsa_time(query, doc, p);
    CHECK(s.value == 1.0);
    CHECK(s.best_window_offset == 5.0);
}

TEST_CASE("rsa_time degrades to a single window on short documents") {
    SymbolSequence doc = as_symbols({60, 62}, 0.5);
    SymbolSequence query = as_symbols({60, 62});
    RsaParams p{50.0, 100.0, 1};
    SimilarityScore s = rsa_time(query, doc, p);
    CHECK(s.value == 1.0);
    CHECK(s.best_window_offset == 0.0);
}

TEST_CASE("rsa_note enumerates note windows") {
    SymbolSequence d = as_symbols({65, 67, 60, 67, 55, 60});  // A B C B G C
    RsaParams p{5.0, 1.0, 1};

    SimilarityScore exact = rsa_note(as_symbols({60, 67, 55}), d, p);  // C B G appears
    CHECK(exact.value == 1.0);
    CHECK(exact.raw_distance == 0.0);
    CHECK(exact.best_window_offset == 2.0);

    SimilarityScore off = rsa_note(as_symbols({65, 60, 67, 55}), d, p);  // A C B G: distance 1
    CHECK(off.raw_distance == 1.0);
    CHECK(off.value == doctest::Approx(0.75));

    CHECK(rsa_note(d, d, p).value == 1.0);
}

TEST_CASE("rsa_note with stride 1 equals the exhaustive window minimum") {
    std::mt19937_64 rng(33);
    for (int iter = 0; iter < 300; ++iter) {
        auto dp = oracles::random_pitches(rng, 1 + rng() % 30, 6);
        auto qp = oracles::random_pitches(rng, 1 + rng() % 10, 6);
        RsaParams p{5.0, 1.0, 1};
        SimilarityScore s = rsa_note(as_symbols(qp), as_symbols(dp), p);
        CHECK(static_cast<int>(s.raw_distance) == oracles::min_window_distance(qp, dp, qp.size()));
    }
}

TEST_CASE("stride 1 never does worse than a coarser stride") {
    std::mt19937_64 rng(34);
    for (int iter = 0; iter < 200; ++iter) {
        auto dp = oracles::random_pitches(rng, 5 + rng() % 40, 5);
        auto qp = oracles::random_pitches(rng, 1 + rng() % 8, 5);
        RsaParams fine{5.0, 1.0, 1};
        RsaParams coarse{5.0, 1.0, 1 + rng() % 5};
        CHECK(rsa_note(as_symbols(qp), as_symbols(dp), fine).raw_distance <=
              rsa_note(as_symbols(qp), as_symbols(dp), coarse).raw_distance);

        RsaParams fine_t{2.0, 0.5, 1};
        RsaParams coarse_t{2.0, 0.5 * static_cast<double>(1 + rng() % 4), 1};
        CHECK(rsa_time(as_symbols(qp), as_symbols(dp), fine_t).raw_distance <=
              rsa_time(as_symbols(qp), as_symbols(dp), coarse_t).raw_distance);
    }
}

TEST_CASE("scores live in [0,1] and hit 1 exactly on zero distance") {
    std::mt19937_64 rng(35);
    RsaParams p{2.0, 0.7, 2};
    for (int iter = 0; iter < 300; ++iter) {
        auto dp = oracles::random_pitches(rng, rng() % 25, 3);
        auto qp = oracles::random_pitches(rng, rng() % 10, 3);
        for (const SimilarityScore& s :
             {rsa_note(as_symbols(qp), as_symbols(dp), p), rsa_time(as_symbols(qp), as_symbols(dp), p)}) {
            CHECK(s.value >= 0.0);
            CHECK(s.value <= 1.0);
            if (!qp.empty()) CHECK((s.value == 1.0) == (s.raw_distance == 0.0));
        }
    }
}

TEST_CASE("empty query scores zero by convention") {
    SymbolSequence doc = as_symbols({60, 62, 64});
    RsaParams p{5.0, 1.0, 1};
    CHECK(rsa_time(SymbolSequence{}, doc, p).value == 0.0);
    CHECK(rsa_note(SymbolSequence{}, doc, p).value == 0.0);
}

TEST_CASE("mongeau-sankoff is zero on identical sequences") {
    auto a = as_processed({{60, 4.0}, {62, 2.0}, {64, 2.0}});
    CHECK(mongeau_sankoff(a, a, MsWeights{}) == 0.0);
}

TEST_CASE("mongeau-sankoff rejects unprocessed sequences") {
    auto plain = as_symbols({60, 62});
    CHECK_THROWS_AS(mongeau_sankoff(plain, plain, MsWeights{}), ArgumentError);
}

TEST_CASE("fragmentation charges only its base when durations are consistent") {
    // one half note against two quarters of the same pitch
    auto a = as_processed({{60, 2.0}});
    auto b = as_processed({{60, 1.0}, {60, 1.0}});
    MsWeights w;
    CHECK(mongeau_sankoff(a, b, w) == doctest::Approx(w.fragmentation_base));
    CHECK(mongeau_sankoff(b, a, w) == doctest::Approx(w.fragmentation_base));  // consolidation mirror
}

TEST_CASE("k=1 unit weights reduce mongeau-sankoff to levenshtein") {
    std::mt19937_64 rng(36);
    MsWeights w = MsWeights::levenshtein_equivalent();
    for (int iter = 0; iter < 300; ++iter) {
        auto ap = oracles::random_pitches(rng, rng() % 12, 4);
        auto bp = oracles::random_pitches(rng, rng() % 12, 4);
        std::vector<std::pair<int, double>> an, bn;
        for (int p : ap) an.emplace_back(p, static_cast<double>(1 + rng() % 8));
        for (int p : bp) bn.emplace_back(p, static_cast<double>(1 + rng() % 8));
        double ms = mongeau_sankoff(as_processed(an), as_processed(bn), w);
        CHECK(ms == doctest::Approx(static_cast<double>(
                        levenshtein(std::span<const int>(ap), std::span<const int>(bp)))));
    }
}

TEST_CASE("interval class folds octaves and inversions") {
    MsWeights w;
    auto cost = [&](int pa, int pb) { return similarity::detail::interval_cost(w, pa, pb); };
    CHECK(cost(60, 60) == 0.0);
    CHECK(cost(60, 72) == 0.0);   // octave
    CHECK(cost(60, 67) == w.interval_costs[5]);  // fifth folds to class 5
    CHECK(cost(60, 53) == w.interval_costs[5]);
    CHECK(cost(60, 66) == w.interval_costs[6]);  // tritone
}

TEST_CASE("ms_similarity scores an exact sub-window as 1") {
    std::vector<std::pair<int, double>> notes;
    for (int i = 0; i < 20; ++i) notes.emplace_back(40 + (i * 13) % 37, 1.0 + i % 5);
    auto doc = as_processed(notes);
    SymbolSequence query;
    query.with_durations = true;
    query.symbols.assign(doc.symbols.begin() + 6, doc.symbols.begin() + 12);
    RsaParams p{5.0, 1.0, 1};
    SimilarityScore s = ms_similarity(query, doc, MsWeights{}, p);
    CHECK(s.value == 1.0);
    CHECK(s.best_window_offset == 6.0);
}

TEST_CASE("ms_similarity against an empty document is zero") {
    auto q = as_processed({{60, 1.0}});
    RsaParams p{5.0, 1.0, 1};
    CHECK(ms_similarity(q, SymbolSequence{}, MsWeights{}, p).value == 0.0);
}

TEST_CASE("fragmenting a held note costs less than a pitch-only edit") {
    // The query splits the document's half note in two. Pitch-only scoring
    // pays a whole deletion for the extra symbol; the duration-aware distance
    // pays only the cheaper fragmentation base.
    auto query = as_processed({{60, 1.0}, {60, 1.0}, {64, 1.0}});
    auto doc = as_processed({{60, 2.0}, {64, 1.0}});
    MsWeights w;
    REQUIRE(w.fragmentation_base < w.insert_delete_base);
    RsaParams p{5.0, 1.0, 1};
    SimilarityScore ms = ms_similarity(query, doc, w, p);
    SimilarityScore plain = rsa_note(query, doc, p);
    CHECK(plain.raw_distance == 1.0);
    CHECK(ms.raw_distance == doctest::Approx(w.fragmentation_base));
    CHECK(ms.value > plain.value);
}

TEST_CASE("ms weight validation rejects bad tables") {
    MsWeights w;
    w.interval_costs[0] = 0.2;  // exact match must stay free
    CHECK_THROWS_AS(w.validate(), ArgumentError);
    MsWeights k;
    k.max_span = 0;
    CHECK_THROWS_AS(k.validate(), ArgumentError);
}
