#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "toxpair/filterbank.hpp"
#include "toxpair/generator.hpp"

namespace toxpair::dataset {

struct Provenance {
    std::uint64_t neutral_id = 0;
    int n = 0;
    std::vector<std::uint64_t> retrieved_ids;
    std::vector<std::string> verdict_refs;  // "stage:variant:label" per passed filter
};

struct PairedSample {
    std::string neutral_text;
    std::string toxic_text;
    Provenance provenance;
    std::string language = "ko";
};

// A fully filtered candidate plus the verdicts that admitted it.
struct SurvivorRecord {
    gen::GenerationCandidate candidate;
    std::vector<std::string> verdict_refs;
};

enum class AssemblePolicy { KeepAll, BestOne };

// KeepAll keeps every survivor; BestOne keeps the lowest-n survivor per
// neutral sentence. Exact duplicate (neutral, toxic) pairs collapse to the
// first in (neutral_id, n) order either way.
std::vector<PairedSample> assemble(std::span<const SurvivorRecord> survivors,
                                   AssemblePolicy policy, const std::string& language = "ko");

struct SplitSpec {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
    std::uint64_t seed = 0;

    // floor:        size = floor(ratio * count) per holdout, remainder to train
    // tidy-holdout: additionally rounds each holdout down to two significant
    //               digits (7555 -> 6055/750/750), remainder to train
    enum class Rounding { Floor, TidyHoldout };
    Rounding rounding = Rounding::TidyHoldout;

    void validate() const;  // ratios positive and summing to 1 within 1e-9
};

struct SplitSizes {
    std::size_t train = 0, val = 0, test = 0;
};
SplitSizes split_sizes(std::size_t count, const SplitSpec& spec);

struct SplitResult {
    std::vector<PairedSample> train, val, test;
};

// Canonicalizes order by content hash before the seeded shuffle, so the
// split is a function of the sample *set*, not of upstream processing order.
SplitResult split(std::vector<PairedSample> samples, const SplitSpec& spec);

enum class ExportFormat { PairsJsonl, DetoxInstructJsonl };

// pairs_jsonl:          {"neutral":…, "toxic":…, "meta":…}
// detox_instruct_jsonl: {"instruction":…, "input": toxic, "output": neutral}
void export_samples(std::span<const PairedSample> samples, const std::filesystem::path& path,
                    ExportFormat format, const std::string& instruction_text = {});

std::vector<PairedSample> import_pairs_jsonl(const std::filesystem::path& path);

}  // namespace toxpair::dataset
