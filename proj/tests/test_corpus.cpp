#include <doctest.h>

#include <random>

#include "test_support.hpp"
#include "toxpair/corpus.hpp"

using namespace toxpair;

TEST_CASE("word_count splits on maximal whitespace runs") {
    CHECK(corpus::word_count("눈 우박 비") == 3);
    CHECK(corpus::word_count("") == 0);
    CHECK(corpus::word_count("a  b\tc") == 3);
    CHECK(corpus::word_count("  leading and trailing  ") == 3);
}

namespace {
corpus::RawRecord rec(std::string text) {
    corpus::RawRecord r;
    r.source = "test";
    r.text = std::move(text);
    return r;
}
}  // namespace

TEST_CASE("clean applies length, duplicate and empty rules") {
    auto result = corpus::clean({rec("a b c"), rec("a b c d"), rec("a b c d"), rec("")});
    REQUIRE(result.kept.size() == 1);
    CHECK(result.kept[0].text == "a b c d");
    CHECK(result.kept[0].id == 0);
    CHECK(result.stats.dropped_short == 1);
    CHECK(result.stats.dropped_dup == 1);
    CHECK(result.stats.dropped_empty == 1);
    CHECK(result.stats.total_in == 4);
    CHECK(result.stats.total_kept == 1);
}

TEST_CASE("clean of empty input is all zeros") {
    auto result = corpus::clean({});
    CHECK(result.kept.empty());
    CHECK(result.stats.total_in == 0);
    CHECK(result.stats.total_kept == 0);
    CHECK(result.stats.mean_word_count == 0.0);
}

TEST_CASE("a 51-word sentence is dropped long") {
    std::string long_text = "w";
    for (int i = 1; i < 51; ++i) long_text += " w" + std::to_string(i);
    REQUIRE(corpus::word_count(long_text) == 51);
    auto result = corpus::clean({rec(long_text)});
    CHECK(result.stats.dropped_long == 1);
    CHECK(result.kept.empty());

    // Exactly 50 words stays.
    std::string ok_text = "w";
    for (int i = 1; i < 50; ++i) ok_text += " w" + std::to_string(i);
    CHECK(corpus::clean({rec(ok_text)}).kept.size() == 1);
}

TEST_CASE("NaN-ish text fields count as empty drops") {
    auto result = corpus::clean({rec("NaN"), rec("nan"), rec("   "), rec("\t")});
    CHECK(result.stats.dropped_empty == 4);
}

TEST_CASE("kept ids are dense and in input order") {
    auto result = corpus::clean({rec("one two three four"), rec("five six seven eight"),
                                 rec("nine ten eleven twelve thirteen")});
    REQUIRE(result.kept.size() == 3);
    for (std::size_t i = 0; i < result.kept.size(); ++i) {
        CHECK(result.kept[i].id == i);
    }
    CHECK(result.stats.mean_word_count == doctest::Approx((4 + 4 + 5) / 3.0));
}

namespace {
std::vector<corpus::RawRecord> random_dirty_corpus(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> count_dist(0, 40);
    std::uniform_int_distribution<int> words_dist(0, 60);
    std::uniform_int_distribution<int> vocab(0, 6);
    std::uniform_int_distribution<int> kind(0, 9);
    std::vector<corpus::RawRecord> records;
    int n = count_dist(rng);
    for (int i = 0; i < n; ++i) {
        corpus::RawRecord r;
        r.source = "rand";
        switch (kind(rng)) {
            case 0: r.text = ""; break;
            case 1: r.text = "   "; break;
            case 2: r.text = "NaN"; break;
            default: {
                int words = words_dist(rng);
                for (int w = 0; w < words; ++w) {
                    if (w) r.text += ' ';
                    r.text += "tok" + std::to_string(vocab(rng));
                }
            }
        }
        records.push_back(std::move(r));
    }
    return records;
}
}  // namespace

TEST_CASE("ledger identity holds over random dirty corpora") {
    std::mt19937_64 rng(20240817);
    for (int trial = 0; trial < 1000; ++trial) {
        auto records = random_dirty_corpus(rng);
        auto result = corpus::clean(records);
        const auto& s = result.stats;
        CHECK(s.total_in == s.total_kept + s.dropped_short + s.dropped_long + s.dropped_dup +
                                s.dropped_empty);
        CHECK(s.total_kept == result.kept.size());
    }
}

TEST_CASE("clean is idempotent over its own output") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        auto first = corpus::clean(random_dirty_corpus(rng));
        std::vector<corpus::RawRecord> again;
        for (const auto& s : first.kept) {
            corpus::RawRecord r;
            r.source = s.source;
            r.text = s.text;
            again.push_back(std::move(r));
        }
        auto second = corpus::clean(again);
        CHECK(second.kept.size() == first.kept.size());
        CHECK(second.stats.dropped_short == 0);
        CHECK(second.stats.dropped_long == 0);
        CHECK(second.stats.dropped_dup == 0);
        CHECK(second.stats.dropped_empty == 0);
        for (std::size_t i = 0; i < second.kept.size(); ++i) {
            CHECK(second.kept[i].text == first.kept[i].text);
            CHECK(second.kept[i].id == first.kept[i].id);
        }
    }
}

TEST_CASE("jsonl loading counts and skips malformed lines") {
    auto ok = corpus::load_records(testsupport::fixture("records_ok.jsonl"),
                                   corpus::RecordFormat::Jsonl);
    CHECK(ok.records.size() == 3);
    CHECK(ok.skipped == 0);
    CHECK(ok.records[0].title.value() == "t1");
    CHECK(ok.records[1].likes.value() == 0);

    auto mixed = corpus::load_records(testsupport::fixture("records_mixed.jsonl"),
                                      corpus::RecordFormat::Jsonl);
    CHECK(mixed.records.size() == 3);
    CHECK(mixed.skipped == 1);
}

TEST_CASE("csv loading maps columns by header name") {
    auto loaded =
        corpus::load_records(testsupport::fixture("records.csv"), corpus::RecordFormat::Csv);
    REQUIRE(loaded.records.size() == 3);
    CHECK(loaded.records[0].source == "forum-a");
    CHECK(loaded.records[1].title.value() == "title, with comma");
    CHECK(loaded.records[1].text == "quoted text, with a comma");
    CHECK(loaded.records[1].likes.value() == 12);
    CHECK(loaded.records[2].text == "bare text value");
}

TEST_CASE("load errors: missing file and nothing-parses") {
    CHECK_THROWS_AS(
        corpus::load_records(testsupport::fixture("nope.jsonl"), corpus::RecordFormat::Jsonl),
        IoError);
    CHECK_THROWS_AS(corpus::load_records(testsupport::fixture("records_bad.jsonl"),
                                         corpus::RecordFormat::Jsonl),
                    corpus::FormatError);
}

TEST_CASE("sentence store round-trips through jsonl") {
    testsupport::TempDir dir("corpus_io");
    auto cleaned = corpus::clean({rec("alpha beta gamma delta"), rec("one two three four five")});
    corpus::save_sentences(dir / "s.jsonl", cleaned.kept);
    auto loaded = corpus::load_sentences(dir / "s.jsonl");
    REQUIRE(loaded.size() == cleaned.kept.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].id == cleaned.kept[i].id);
        CHECK(loaded[i].text == cleaned.kept[i].text);
        CHECK(loaded[i].word_count == cleaned.kept[i].word_count);
    }
}
