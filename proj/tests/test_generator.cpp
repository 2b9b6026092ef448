#include <doctest.h>

#include <atomic>

#include "test_support.hpp"
#include "toxpair/generator.hpp"
#include "toxpair/util.hpp"

using namespace toxpair;
using testsupport::MockGateway;

namespace {

std::vector<corpus::CleanSentence> comment_corpus() {
    std::vector<corpus::CleanSentence> out;
    for (std::uint64_t i = 0; i < 12; ++i) {
        out.push_back({i, "community comment number " + std::to_string(i), 4, "forum"});
    }
    return out;
}

corpus::CleanSentence neutral(std::uint64_t id, std::string text) {
    return {id, std::move(text), 5, "daily"};
}

std::string full_prompt(const gateway::ChatRequest& request) {
    return request.system_text + "\n" + request.user_text;
}

std::size_t count_occurrences(const std::string& haystack, const std::string& needle) {
    std::size_t count = 0;
    for (auto pos = haystack.find(needle); pos != std::string::npos;
         pos = haystack.find(needle, pos + needle.size())) {
        ++count;
    }
    return count;
}

// What the slang-retrieval prompt carried in its comments slot.
std::string comments_slot_of(const std::string& user_text) {
    auto start = user_text.find("comments from online communities:");
    auto end = user_text.find("input sentence:", start);
    REQUIRE(start != std::string::npos);
    REQUIRE(end != std::string::npos);
    start += std::string("comments from online communities:").size();
    return util::trim(user_text.substr(start, end - start));
}

}  // namespace

TEST_CASE("the default prompt asset loads with three shots") {
    auto tmpl = gen::PromptTemplate::load(testsupport::asset("generation_prompt.txt"));
    CHECK(tmpl.shot_count() == 3);
    CHECK(tmpl.guidelines_block.find("Be sure to answer in one sentence") != std::string::npos);
}

TEST_CASE("assemble_prompt substitutes comments and input in slot order") {
    auto tmpl = gen::PromptTemplate::load(testsupport::asset("generation_prompt.txt"));
    std::vector<std::string> comments{"first retrieved", "second retrieved", "third retrieved"};
    auto request = gen::assemble_prompt(tmpl, "the neutral sentence", comments);

    std::string prompt = full_prompt(request);
    CHECK(prompt.find("first retrieved\nsecond retrieved\nthird retrieved") != std::string::npos);
    CHECK(count_occurrences(prompt, "the neutral sentence") == 1);
    CHECK(prompt.find("Be sure to answer in one sentence") != std::string::npos);
    CHECK(prompt.find(gen::kCommentsSlot) == std::string::npos);
    CHECK(prompt.find(gen::kInputSlot) == std::string::npos);
}

TEST_CASE("zero comments render the empty marker") {
    auto tmpl = gen::PromptTemplate::load(testsupport::asset("generation_prompt.txt"));
    auto request = gen::assemble_prompt(tmpl, "some neutral line", {});
    std::string prompt = full_prompt(request);
    CHECK(prompt.find(gen::kEmptyCommentsMarker) != std::string::npos);
    CHECK(prompt.find(gen::kCommentsSlot) == std::string::npos);
}

TEST_CASE("slot-shaped input text is data, not a template slot") {
    auto tmpl = gen::PromptTemplate::load(testsupport::asset("generation_prompt.txt"));
    std::string tricky = "contains {input_sentence} and {community_comments} literally";
    auto request = gen::assemble_prompt(tmpl, tricky, {"a comment"});
    std::string prompt = full_prompt(request);
    CHECK(count_occurrences(prompt, tricky) == 1);
    // The only remaining slot tokens are the ones inside the data.
    CHECK(count_occurrences(prompt, gen::kInputSlot) == 1);
    CHECK(count_occurrences(prompt, gen::kCommentsSlot) == 1);
    CHECK(prompt.find("a comment") != std::string::npos);
}

TEST_CASE("template validation rejects missing slots and extra shots") {
    CHECK_THROWS_AS(gen::PromptTemplate::parse("[guidelines]\ng\n[task]\nt\n[examples]\n"
                                               "<Example 1>\n<Example 2>\n<Example 3>\n"
                                               "[query]\nonly {input_sentence} here\n"),
                    gen::TemplateError);

    std::string four_shots =
        "[guidelines]\ng\n[task]\nt\n[examples]\n<Example 1>\n<Example 2>\n<Example 3>\n"
        "<Example 4>\n[query]\n{community_comments}\n{input_sentence}\n";
    CHECK_THROWS_AS(gen::PromptTemplate::parse(four_shots), gen::TemplateError);
    CHECK_NOTHROW(gen::PromptTemplate::parse(four_shots, /*allow_any_shot_count=*/true));

    std::string doubled_slot =
        "[guidelines]\ng\n[task]\nt\n[examples]\n<Example 1>\n<Example 2>\n<Example 3>\n"
        "[query]\n{community_comments}\n{input_sentence}\n{input_sentence}\n";
    CHECK_THROWS_AS(gen::PromptTemplate::parse(doubled_slot), gen::TemplateError);
}

TEST_CASE("generate_for yields one candidate per n value") {
    MockGateway mock;
    auto comments = comment_corpus();
    auto index = retrieval::VectorIndex::build(comments, *mock);
    auto lookup = gen::make_comment_lookup(comments);
    auto tmpl = gen::PromptTemplate::load(testsupport::asset("generation_prompt.txt"));

    auto batch = gen::generate_for(neutral(0, "a perfectly ordinary sentence"), index, *mock,
                                   tmpl, lookup);
    CHECK(batch.failures.empty());
    REQUIRE(batch.candidates.size() == 5);
    std::vector<int> ns;
    for (const auto& c : batch.candidates) {
        ns.push_back(c.n);
        CHECK(c.retrieved_ids.size() == static_cast<std::size_t>(c.n));
        CHECK_FALSE(util::trim(c.toxic_text).empty());
    }
    CHECK(ns == std::vector<int>{0, 3, 5, 7, 9});
}

TEST_CASE("echo-input mock makes the n=0 candidate equal the neutral text") {
    auto handler = [](const gateway::ChatRequest& request) {
        auto pos = util::to_lower(request.user_text).rfind("input sentence:");
        return util::trim(request.user_text.substr(pos + 15));
    };
    MockGateway mock(handler);
    auto comments = comment_corpus();
    auto index = retrieval::VectorIndex::build(comments, *mock);
    auto lookup = gen::make_comment_lookup(comments);
    auto tmpl = gen::PromptTemplate::load(testsupport::asset("generation_prompt.txt"));

    gen::GenerationOptions options;
    options.n_values = {0};
    auto batch = gen::generate_for(neutral(3, "echo me back please"), index, *mock, tmpl, lookup,
                                   options);
    REQUIRE(batch.candidates.size() == 1);
    CHECK(batch.candidates[0].toxic_text == "echo me back please");
    CHECK(batch.candidates[0].retrieved_ids.empty());
}

TEST_CASE("echo-comments mock proves the top-n retrievals reach the prompt") {
    auto handler = [](const gateway::ChatRequest& request) {
        return comments_slot_of(request.user_text);
    };
    MockGateway mock(handler);
    auto comments = comment_corpus();
    auto index = retrieval::VectorIndex::build(comments, *mock);
    auto lookup = gen::make_comment_lookup(comments);
    auto tmpl = gen::PromptTemplate::load(testsupport::asset("generation_prompt.txt"));

    gen::GenerationOptions options;
    options.n_values = {3};
    auto batch =
        gen::generate_for(neutral(5, "what should the prompt hold"), index, *mock, tmpl, lookup,
                          options);
    REQUIRE(batch.candidates.size() == 1);
    const auto& candidate = batch.candidates[0];

    auto oracle = index.query("what should the prompt hold", 3, *mock);
    REQUIRE(oracle.size() == 3);
    std::string expected;
    for (std::size_t i = 0; i < oracle.size(); ++i) {
        if (i) expected += '\n';
        expected += lookup.at(oracle[i].sentence_id);
        CHECK(candidate.retrieved_ids[i] == oracle[i].sentence_id);
    }
    CHECK(candidate.toxic_text == expected);
}

TEST_CASE("a failing n keeps the other candidates") {
    std::atomic<int> call{0};
    auto handler = [&call](const gateway::ChatRequest& request) -> std::string {
        if (request.tag.find(":n=5") != std::string::npos) {
            throw gateway::MalformedResponse("scripted failure");
        }
        ++call;
        return "rewritten output";
    };
    MockGateway mock(handler);
    auto comments = comment_corpus();
    auto index = retrieval::VectorIndex::build(comments, *mock);
    auto lookup = gen::make_comment_lookup(comments);
    auto tmpl = gen::PromptTemplate::load(testsupport::asset("generation_prompt.txt"));

    auto batch = gen::generate_for(neutral(1, "some neutral words here"), index, *mock, tmpl,
                                   lookup);
    CHECK(batch.candidates.size() == 4);
    REQUIRE(batch.failures.size() == 1);
    CHECK(batch.failures[0].n == 5);
}

TEST_CASE("batch_generate resumes from its checkpoint") {
    testsupport::TempDir dir("gen_ckpt");
    auto comments = comment_corpus();
    auto tmpl = gen::PromptTemplate::load(testsupport::asset("generation_prompt.txt"));
    std::vector<corpus::CleanSentence> neutrals;
    for (std::uint64_t i = 0; i < 4; ++i) {
        neutrals.push_back(neutral(i, "neutral sentence number " + std::to_string(i)));
    }
    gen::GenerationOptions options;
    options.n_values = {0, 3};

    MockGateway mock;
    auto index = retrieval::VectorIndex::build(comments, *mock);
    auto lookup = gen::make_comment_lookup(comments);

    std::vector<gen::GenerationCandidate> first_sink;
    auto first = gen::batch_generate(std::span(neutrals).subspan(0, 2), index, *mock, tmpl,
                                     lookup, dir / "ckpt.jsonl",
                                     [&](const auto& c) { first_sink.push_back(c); }, options);
    CHECK(first.neutrals_processed == 2);
    CHECK(first_sink.size() == 4);

    std::vector<gen::GenerationCandidate> second_sink;
    auto second = gen::batch_generate(neutrals, index, *mock, tmpl, lookup, dir / "ckpt.jsonl",
                                      [&](const auto& c) { second_sink.push_back(c); }, options);
    CHECK(second.neutrals_processed == 2);
    CHECK(second.neutrals_skipped == 2);
    REQUIRE(second_sink.size() == 4);
    CHECK(second_sink[0].neutral_id == 2);
    CHECK(second_sink[2].neutral_id == 3);

    // Fully checkpointed rerun must not touch the backend at all.
    int calls_before = mock.chat->calls();
    int embeds_before = mock.embed->calls();
    auto third = gen::batch_generate(neutrals, index, *mock, tmpl, lookup, dir / "ckpt.jsonl",
                                     [](const auto&) {}, options);
    CHECK(third.neutrals_processed == 0);
    CHECK(third.neutrals_skipped == 4);
    CHECK(mock.chat->calls() == calls_before);
    CHECK(mock.embed->calls() == embeds_before);
}

TEST_CASE("batch_generate over an empty list does nothing") {
    testsupport::TempDir dir("gen_empty");
    MockGateway mock;
    auto comments = comment_corpus();
    auto index = retrieval::VectorIndex::build(comments, *mock);
    auto lookup = gen::make_comment_lookup(comments);
    auto tmpl = gen::PromptTemplate::load(testsupport::asset("generation_prompt.txt"));

    int calls_before = mock.chat->calls();
    auto stats = gen::batch_generate({}, index, *mock, tmpl, lookup, dir / "ckpt.jsonl",
                                     [](const auto&) { FAIL("no candidates expected"); });
    CHECK(stats.neutrals_processed == 0);
    CHECK(mock.chat->calls() == calls_before);
}

TEST_CASE("a corrupt checkpoint refuses to restart from zero") {
    testsupport::TempDir dir("gen_corrupt");
    testsupport::write_file(dir / "ckpt.jsonl", "{\"neutral_id\": 0}\ngarbage line\n");
    MockGateway mock;
    auto comments = comment_corpus();
    auto index = retrieval::VectorIndex::build(comments, *mock);
    auto lookup = gen::make_comment_lookup(comments);
    auto tmpl = gen::PromptTemplate::load(testsupport::asset("generation_prompt.txt"));
    std::vector<corpus::CleanSentence> neutrals{neutral(0, "first neutral sentence here")};

    CHECK_THROWS_AS(gen::batch_generate(neutrals, index, *mock, tmpl, lookup, dir / "ckpt.jsonl",
                                        [](const auto&) {}),
                    IoError);
}

TEST_CASE("candidate jsonl round-trips") {
    testsupport::TempDir dir("gen_io");
    std::vector<gen::GenerationCandidate> candidates{
        {0, "neutral a", 3, {5, 2, 9}, "toxic a", "mock"},
        {1, "neutral b", 0, {}, "toxic b", "mock"},
    };
    gen::save_candidates(dir / "c.jsonl", candidates);
    auto loaded = gen::load_candidates(dir / "c.jsonl");
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].retrieved_ids == std::vector<std::uint64_t>{5, 2, 9});
    CHECK(loaded[1].toxic_text == "toxic b");
}
