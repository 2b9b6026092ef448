#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "toxpair/errors.hpp"

namespace toxpair::corpus {

// Raw ingestion record; dirty by definition, only `text` is required.
struct RawRecord {
    std::string source;
    std::optional<std::string> title;
    std::optional<long long> likes;
    std::string text;
};

struct CleanSentence {
    std::uint64_t id = 0;  // dense, assigned in input order
    std::string text;      // trimmed, unique within a store
    int word_count = 0;    // within [kMinWords, kMaxWords]
    std::string source;
};

struct CorpusStats {
    std::uint64_t total_in = 0;
    std::uint64_t total_kept = 0;
    double mean_word_count = 0.0;
    std::uint64_t dropped_short = 0;
    std::uint64_t dropped_long = 0;
    std::uint64_t dropped_dup = 0;
    std::uint64_t dropped_empty = 0;
};

struct CleanResult {
    std::vector<CleanSentence> kept;
    CorpusStats stats;
};

inline constexpr int kMinWords = 4;
inline constexpr int kMaxWords = 50;

// Maximal whitespace-delimited segments.
int word_count(std::string_view text);

// Applies, in order per record: empty/NaN drop, length bounds, exact-text
// dedup (first occurrence wins). Never fails; everything dropped is counted.
CleanResult clean(const std::vector<RawRecord>& records);

enum class RecordFormat { Jsonl, Csv };

struct LoadResult {
    std::vector<RawRecord> records;
    std::uint64_t skipped = 0;  // malformed lines/rows
};

// JSONL objects {"source","title","likes","text"} or a CSV with that header.
// Throws IoError if unreadable, FormatError if no row parses.
LoadResult load_records(const std::filesystem::path& path, RecordFormat format);

class FormatError : public Error {
public:
    using Error::Error;
};

void save_sentences(const std::filesystem::path& path, std::span<const CleanSentence> sentences);
std::vector<CleanSentence> load_sentences(const std::filesystem::path& path);
void save_stats(const std::filesystem::path& path, const CorpusStats& stats);

}  // namespace toxpair::corpus
