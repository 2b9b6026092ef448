#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "toxpair/dataset_io.hpp"
#include "toxpair/gateway.hpp"
#include "toxpair/generator.hpp"

namespace toxpair::eval {

class EmptyAfterDrop : public Error {
public:
    using Error::Error;
};

// 1-5 rubric prompt. Consistency is the only criterion judged on the pair;
// the rest see the toxic side alone.
struct Criterion {
    std::string name;
    std::string prompt_text;
    bool requires_pair = false;

    static Criterion load(const std::string& name, const std::filesystem::path& path);
};

inline const std::array<const char*, 4> kCriterionNames = {
    "overall_offensiveness", "implicit_offensiveness", "consistency", "fluency"};

struct ScoreRecord {
    std::uint64_t sample_id = 0;
    std::string criterion;
    int score = 0;  // 1..5
    std::string raw_judge_text;
};

struct AggregateReport {
    std::string criterion;
    std::uint64_t n = 0;
    double mean = 0.0;
    double std_error = 0.0;  // sample std (ddof=1) / sqrt(n)
};

struct GEvalResult {
    std::vector<ScoreRecord> records;
    AggregateReport report;
    std::uint64_t dropped = 0;  // unusable after one structured retry
};

// Bare integer anywhere in the first line of the reply.
std::optional<int> parse_score(const std::string& reply);

// Welford-style aggregation; the tests check it against a two-pass oracle.
AggregateReport aggregate(const std::string& criterion, std::span<const int> scores);

// Seeded sample-without-replacement over the pairs, one judge call per
// sample; out-of-range or unparseable scores get one stricter retry, then
// the sample is dropped and counted.
GEvalResult g_eval(std::span<const dataset::PairedSample> samples, const Criterion& criterion,
                   gateway::Gateway& gateway, std::size_t sample_size, std::uint64_t seed);

// Deterministic indices into [0, population) chosen without replacement.
std::vector<std::size_t> sample_indices(std::size_t population, std::size_t sample_size,
                                        std::uint64_t seed);

struct RankHistogram {
    std::vector<int> n_values;  // column order of rows
    // per n value: counts of rank 1..5 assignments
    std::map<int, std::array<std::uint64_t, 5>> counts;
    std::uint64_t groups_ranked = 0;
    std::uint64_t groups_skipped = 0;  // unparseable rankings
};

// Asks the judge to rank each neutral's fanout by implicit offensiveness
// (1st = most aligned). Replies must be a permutation of 1..group size.
RankHistogram rank_retrievals(std::span<const std::vector<gen::GenerationCandidate>> groups,
                              gateway::Gateway& gateway);

// Validates that `ranks` is a bijection onto 1..n.
bool is_permutation_1_to_n(std::span<const int> ranks);

void save_scores(const std::filesystem::path& path, std::span<const ScoreRecord> records);
void save_aggregates(const std::filesystem::path& path,
                     std::span<const AggregateReport> reports);

}  // namespace toxpair::eval
