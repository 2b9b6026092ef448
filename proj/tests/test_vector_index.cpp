#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "test_support.hpp"
#include "toxpair/vector_index.hpp"

using namespace toxpair;
using testsupport::MockGateway;

namespace {

std::vector<corpus::CleanSentence> sentences(std::initializer_list<const char*> texts) {
    std::vector<corpus::CleanSentence> out;
    std::uint64_t id = 0;
    for (const char* t : texts) out.push_back({id++, t, 4, "test"});
    return out;
}

// Independent check: full stable sort over every entry.
std::vector<retrieval::RetrievalHit> brute_force(const retrieval::VectorIndex& index,
                                                 std::span<const float> query, int k) {
    std::vector<retrieval::RetrievalHit> hits;
    for (std::size_t row = 0; row < index.size(); ++row) {
        auto v = index.vector_at(row);
        double dot = 0.0;
        for (std::size_t d = 0; d < v.size(); ++d) {
            dot += static_cast<double>(v[d]) * static_cast<double>(query[d]);
        }
        hits.push_back({index.id_at(row), dot, 0});
    }
    std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.sentence_id < b.sentence_id;
    });
    hits.resize(std::min<std::size_t>(static_cast<std::size_t>(k), hits.size()));
    for (std::size_t i = 0; i < hits.size(); ++i) hits[i].rank = static_cast<int>(i) + 1;
    return hits;
}

retrieval::VectorIndex random_unit_index(std::size_t count, int dimension, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<float> data;
    std::vector<std::uint64_t> ids;
    data.reserve(count * static_cast<std::size_t>(dimension));
    for (std::size_t i = 0; i < count; ++i) {
        std::vector<double> raw(static_cast<std::size_t>(dimension));
        double sq = 0.0;
        for (auto& v : raw) {
            v = gauss(rng);
            sq += v * v;
        }
        double norm = std::sqrt(sq);
        for (double v : raw) data.push_back(static_cast<float>(v / norm));
        ids.push_back(i);
    }
    return retrieval::VectorIndex::from_entries(dimension, std::move(ids), std::move(data),
                                                "random-test");
}

std::vector<float> random_unit_vector(int dimension, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> raw(static_cast<std::size_t>(dimension));
    double sq = 0.0;
    for (auto& v : raw) {
        v = gauss(rng);
        sq += v * v;
    }
    std::vector<float> out;
    out.reserve(raw.size());
    for (double v : raw) out.push_back(static_cast<float>(v / std::sqrt(sq)));
    return out;
}

}  // namespace

TEST_CASE("build keeps one unit entry per sentence in order") {
    MockGateway mock;
    auto index = retrieval::VectorIndex::build(
        sentences({"first comment text", "second comment text", "third comment text"}), *mock);
    CHECK(index.size() == 3);
    CHECK(index.dimension() == 16);
    CHECK(index.fingerprint() == mock.gateway->embed_fingerprint());
    for (std::size_t i = 0; i < index.size(); ++i) {
        CHECK(index.id_at(i) == i);
        double sq = 0.0;
        for (float v : index.vector_at(i)) sq += static_cast<double>(v) * v;
        CHECK(std::abs(std::sqrt(sq) - 1.0) <= 1e-6);
    }
}

TEST_CASE("build rejects empty corpora and duplicate ids") {
    MockGateway mock;
    CHECK_THROWS_AS(retrieval::VectorIndex::build({}, *mock), retrieval::EmptyCorpus);
    auto dup = sentences({"alpha beta gamma delta", "echo foxtrot golf hotel"});
    dup[1].id = dup[0].id;
    CHECK_THROWS_AS(retrieval::VectorIndex::build(dup, *mock), Error);
}

TEST_CASE("identical build inputs produce byte-identical index files") {
    testsupport::TempDir dir("index_det");
    auto corpus = sentences({"one two three four", "five six seven eight", "nine ten more words"});
    MockGateway mock_a, mock_b;
    retrieval::VectorIndex::build(corpus, *mock_a).save(dir / "a.idx");
    retrieval::VectorIndex::build(corpus, *mock_b).save(dir / "b.idx");
    CHECK(testsupport::read_file(dir / "a.idx") == testsupport::read_file(dir / "b.idx"));
}

TEST_CASE("query for an indexed sentence returns it at rank 1 with score ~1") {
    MockGateway mock;
    auto corpus = sentences({"the quick brown fox", "jumps over the lazy dog", "and runs away"});
    auto index = retrieval::VectorIndex::build(corpus, *mock);
    auto hits = index.query("jumps over the lazy dog", 2, *mock);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].sentence_id == 1);
    CHECK(hits[0].rank == 1);
    CHECK(std::abs(hits[0].score - 1.0) <= 1e-6);
}

TEST_CASE("k = 0 returns nothing; k beyond size clamps") {
    MockGateway mock;
    auto index = retrieval::VectorIndex::build(sentences({"just one sentence here"}), *mock);
    CHECK(index.query("just one sentence here", 0, *mock).empty());
    CHECK(index.query("just one sentence here", 10, *mock).size() == 1);
}

TEST_CASE("query matches the exhaustive brute-force oracle with identical tie-breaks") {
    auto index = random_unit_index(200, 16, 0xfeed);
    std::mt19937_64 rng(0xbeef);
    for (int trial = 0; trial < 25; ++trial) {
        auto query = random_unit_vector(16, rng);
        for (int k : {0, 3, 5, 7, 9}) {
            auto fast = index.query_vector(query, k);
            auto slow = brute_force(index, query, k);
            REQUIRE(fast.size() == slow.size());
            for (std::size_t i = 0; i < fast.size(); ++i) {
                CHECK(fast[i].sentence_id == slow[i].sentence_id);
                CHECK(fast[i].rank == slow[i].rank);
                CHECK(fast[i].score == slow[i].score);
            }
        }
    }
}

TEST_CASE("ties break by ascending sentence id") {
    // Two identical vectors with different ids.
    std::vector<float> data{1.0f, 0.0f, 1.0f, 0.0f, 0.0f, 1.0f};
    auto index = retrieval::VectorIndex::from_entries(2, {7, 3, 5}, std::move(data), "ties");
    std::vector<float> query{1.0f, 0.0f};
    auto hits = index.query_vector(query, 3);
    REQUIRE(hits.size() == 3);
    CHECK(hits[0].sentence_id == 3);  // score 1.0, lower id first
    CHECK(hits[1].sentence_id == 7);
    CHECK(hits[2].sentence_id == 5);
}

TEST_CASE("cosine score agrees with 1 - d^2/2 for unit vectors") {
    auto index = random_unit_index(64, 16, 0xc0de);
    std::mt19937_64 rng(0xd00d);
    auto query = random_unit_vector(16, rng);
    auto hits = index.query_vector(query, static_cast<int>(index.size()));
    for (const auto& hit : hits) {
        // locate the row for this id (ids are 0..63 in row order here)
        auto row = index.vector_at(static_cast<std::size_t>(hit.sentence_id));
        double d2 = 0.0;
        for (std::size_t d = 0; d < row.size(); ++d) {
            double diff = static_cast<double>(row[d]) - static_cast<double>(query[d]);
            d2 += diff * diff;
        }
        CHECK(std::abs(hit.score - (1.0 - d2 / 2.0)) <= 1e-6);
    }
    // Descending cosine order must equal ascending L2 order.
    for (std::size_t i = 1; i < hits.size(); ++i) {
        CHECK(hits[i - 1].score >= hits[i].score);
    }
}

TEST_CASE("save/load round-trips structurally and bit-exactly") {
    testsupport::TempDir dir("index_io");
    auto index = random_unit_index(10, 8, 42);
    index.save(dir / "x.idx");
    auto loaded = retrieval::VectorIndex::load(dir / "x.idx");
    CHECK(loaded.dimension() == index.dimension());
    CHECK(loaded.size() == index.size());
    CHECK(loaded.fingerprint() == index.fingerprint());
    for (std::size_t i = 0; i < index.size(); ++i) {
        CHECK(loaded.id_at(i) == index.id_at(i));
        auto a = index.vector_at(i);
        auto b = loaded.vector_at(i);
        CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
    }
    loaded.save(dir / "y.idx");
    CHECK(testsupport::read_file(dir / "x.idx") == testsupport::read_file(dir / "y.idx"));
}

TEST_CASE("truncated index files never load partially") {
    testsupport::TempDir dir("index_trunc");
    random_unit_index(6, 4, 1).save(dir / "full.idx");
    std::string bytes = testsupport::read_file(dir / "full.idx");
    for (std::size_t cut : {std::size_t{0}, std::size_t{2}, std::size_t{7}, std::size_t{15},
                            bytes.size() / 2, bytes.size() - 1}) {
        testsupport::write_file(dir / "cut.idx", bytes.substr(0, cut));
        CHECK_THROWS_AS(retrieval::VectorIndex::load(dir / "cut.idx"), Error);
    }
    // Trailing garbage is rejected too.
    testsupport::write_file(dir / "fat.idx", bytes + "x");
    CHECK_THROWS_AS(retrieval::VectorIndex::load(dir / "fat.idx"), retrieval::VersionMismatch);
}

TEST_CASE("wrong magic bytes raise VersionMismatch") {
    testsupport::TempDir dir("index_magic");
    testsupport::write_file(dir / "bad.idx", "NOPE this is not an index file");
    CHECK_THROWS_AS(retrieval::VectorIndex::load(dir / "bad.idx"), retrieval::VersionMismatch);
}

TEST_CASE("querying with a mismatched embed backend is rejected") {
    MockGateway build_gateway({}, 16, 7);
    auto index = retrieval::VectorIndex::build(sentences({"some sentence words here"}),
                                               *build_gateway);
    MockGateway other({}, 16, 8);  // different seed -> different fingerprint
    CHECK_THROWS_AS(index.query("some sentence words here", 1, *other),
                    retrieval::FingerprintMismatch);
}
