#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "toxpair/gateway.hpp"
#include "toxpair/generator.hpp"

namespace toxpair::filters {

enum class Stage { Consistency, Offensiveness };

std::string to_string(Stage stage);
Stage stage_from_string(const std::string& name);

// A judge prompt variant: asset body plus the label contract. The pass set
// is declared in the asset header, not hard-coded, so ambiguous variants
// (e.g. which class passes for the QA prompt) stay configurable.
struct FilterVariant {
    Stage stage = Stage::Consistency;
    std::string name;                      // e.g. "context-shift"
    std::string body;                      // prompt text with {count} and {batch} slots
    std::vector<std::string> labels;       // declared label set
    std::vector<std::string> pass_labels;  // non-empty subset of labels
    int batch_size = 5;
    bool numeric_labels = false;  // multi-meaning: judge may answer with a score

    static FilterVariant load(const std::filesystem::path& path);
    static FilterVariant parse(const std::string& asset_text);

    bool passes(const std::string& label) const;
};

struct FilterVerdict {
    std::uint64_t neutral_id = 0;
    int candidate_n = 0;
    Stage stage = Stage::Consistency;
    std::string variant;
    std::string label;  // canonical label, empty when unparseable
    bool pass = false;
    bool unparseable = false;
    std::string raw_judge_text;
};

struct RetentionReport {
    Stage stage = Stage::Consistency;
    std::string variant;
    std::uint64_t total_in = 0;
    std::uint64_t retained = 0;
    std::uint64_t rejected = 0;
    std::uint64_t unparseable = 0;
    double rate = 0.0;  // retained / total_in
};

struct ParsedLabel {
    int index = 0;  // 1-based position within the judged batch
    std::string label;
};

// Tolerant batch parse of the "1. {label} 2. {label}" judge format: any
// index order, case-insensitive labels, collapsed whitespace. Missing or
// duplicated indices yield nullopt and the caller fails closed. With
// allow_numeric, an item may instead carry a decimal score (returned
// verbatim as the label).
std::optional<std::vector<ParsedLabel>> parse_batch_labels(
    const std::string& raw_judge_text, int expected_count, std::span<const std::string> label_set,
    bool allow_numeric = false);

// Score thresholds of the multi-meaning sub-procedure.
std::string classify_multi_meaning_score(double score);

// One verdict per candidate, in order. Judge errors and unparseable output
// mark every affected verdict unparseable with pass=false.
std::vector<FilterVerdict> judge_consistency(std::span<const gen::GenerationCandidate> pairs,
                                             const FilterVariant& variant,
                                             gateway::Gateway& gateway);
std::vector<FilterVerdict> judge_offensiveness(std::span<const gen::GenerationCandidate> pairs,
                                               const FilterVariant& variant,
                                               gateway::Gateway& gateway);

struct StageResult {
    std::vector<gen::GenerationCandidate> survivors;
    std::vector<FilterVerdict> verdicts;
    RetentionReport report;
};

// Groups candidates by neutral sentence (the n-fanout of one neutral forms a
// judge batch), judges every group, and keeps the passers. The report ledger
// always balances: total_in = retained + rejected + unparseable.
StageResult run_stage(std::span<const gen::GenerationCandidate> candidates,
                      const FilterVariant& variant, gateway::Gateway& gateway);

// Survivors that pass both constituent variants (Context Shift ∩ QA-and-
// Paraphrasing in the default configuration). A candidate unparseable under
// either side is counted unparseable.
StageResult run_intersection(std::span<const gen::GenerationCandidate> candidates,
                             const FilterVariant& first, const FilterVariant& second,
                             gateway::Gateway& gateway);

void save_verdicts(const std::filesystem::path& path, std::span<const FilterVerdict> verdicts);
std::vector<FilterVerdict> load_verdicts(const std::filesystem::path& path);
void save_report(const std::filesystem::path& path, const RetentionReport& report);

}  // namespace toxpair::filters
