#include "toxpair/corpus.hpp"

#include <cctype>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "toxpair/jsonl.hpp"
#include "toxpair/util.hpp"

namespace toxpair::corpus {

int word_count(std::string_view text) {
    int count = 0;
    bool in_word = false;
    for (unsigned char c : text) {
        if (std::isspace(c) != 0) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++count;
        }
    }
    return count;
}

namespace {
// The "NaN" rule covers blank fields and the two literal spellings seen in
// raw exports.
bool is_nanish(std::string_view trimmed) {
    return trimmed.empty() || trimmed == "NaN" || trimmed == "nan";
}
}  // namespace

CleanResult clean(const std::vector<RawRecord>& records) {
    CleanResult result;
    result.stats.total_in = records.size();

    std::unordered_set<std::string> seen;
    seen.reserve(records.size());
    double word_sum = 0.0;

    for (const auto& record : records) {
        std::string text = util::trim(record.text);
        if (is_nanish(text)) {
            ++result.stats.dropped_empty;
            continue;
        }
        int words = word_count(text);
        if (words < kMinWords) {
            ++result.stats.dropped_short;
            continue;
        }
        if (words > kMaxWords) {
            ++result.stats.dropped_long;
            continue;
        }
        if (!seen.insert(text).second) {
            ++result.stats.dropped_dup;
            continue;
        }
        CleanSentence sentence;
        sentence.id = result.kept.size();
        sentence.text = std::move(text);
        sentence.word_count = words;
        sentence.source = record.source;
        word_sum += words;
        result.kept.push_back(std::move(sentence));
    }

    result.stats.total_kept = result.kept.size();
    if (result.stats.total_kept > 0) {
        result.stats.mean_word_count = word_sum / static_cast<double>(result.stats.total_kept);
    }
    return result;
}

namespace {

RawRecord record_from_json(const nlohmann::json& j) {
    RawRecord record;
    if (j.contains("source") && j["source"].is_string()) record.source = j["source"];
    if (j.contains("title") && j["title"].is_string()) record.title = j["title"].get<std::string>();
    if (j.contains("likes") && j["likes"].is_number_integer()) {
        record.likes = j["likes"].get<long long>();
    }
    if (j.contains("text") && j["text"].is_string()) record.text = j["text"];
    return record;
}

// Minimal RFC-4180 row split: quoted fields, doubled quotes, embedded commas.
std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current.push_back(c);
            }
        } else if (c == '"' && current.empty()) {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else if (c != '\r') {
            current.push_back(c);
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

LoadResult load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in.is_open()) throw IoError("cannot open " + path.string());

    LoadResult result;
    std::string line;
    if (!std::getline(in, line)) {
        throw FormatError("csv file has no header: " + path.string());
    }
    auto header = split_csv_row(line);
    std::size_t source_col = std::string::npos, title_col = std::string::npos;
    std::size_t likes_col = std::string::npos, text_col = std::string::npos;
    for (std::size_t i = 0; i < header.size(); ++i) {
        std::string name = util::to_lower(util::trim(header[i]));
        if (name == "source") source_col = i;
        else if (name == "title") title_col = i;
        else if (name == "likes") likes_col = i;
        else if (name == "text") text_col = i;
    }
    if (text_col == std::string::npos) {
        throw FormatError("csv header lacks a 'text' column: " + path.string());
    }

    while (std::getline(in, line)) {
        if (util::trim_view(line).empty()) continue;
        auto fields = split_csv_row(line);
        if (fields.size() <= text_col) {
            ++result.skipped;
            continue;
        }
        RawRecord record;
        record.text = fields[text_col];
        if (source_col != std::string::npos && source_col < fields.size()) {
            record.source = fields[source_col];
        }
        if (title_col != std::string::npos && title_col < fields.size() &&
            !fields[title_col].empty()) {
            record.title = fields[title_col];
        }
        if (likes_col != std::string::npos && likes_col < fields.size()) {
            try {
                record.likes = std::stoll(fields[likes_col]);
            } catch (const std::exception&) {
            }
        }
        result.records.push_back(std::move(record));
    }
    if (result.records.empty() && result.skipped > 0) {
        throw FormatError("no csv row parsed in " + path.string());
    }
    return result;
}

LoadResult load_jsonl(const std::filesystem::path& path) {
    LoadResult result;
    std::size_t bad_shape = 0;
    result.skipped = jsonl::for_each_record(path, [&](std::size_t, const nlohmann::json& j) {
        if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
            ++bad_shape;
            return;
        }
        result.records.push_back(record_from_json(j));
    });
    result.skipped += bad_shape;
    if (result.records.empty() && result.skipped > 0) {
        throw FormatError("no jsonl record parsed in " + path.string());
    }
    return result;
}

}  // namespace

LoadResult load_records(const std::filesystem::path& path, RecordFormat format) {
    if (!std::filesystem::exists(path)) {
        throw IoError("no such file: " + path.string());
    }
    return format == RecordFormat::Jsonl ? load_jsonl(path) : load_csv(path);
}

void save_sentences(const std::filesystem::path& path, std::span<const CleanSentence> sentences) {
    jsonl::Writer writer(path);
    for (const auto& s : sentences) {
        writer.write({{"id", s.id}, {"text", s.text}, {"word_count", s.word_count},
                      {"source", s.source}});
    }
}

std::vector<CleanSentence> load_sentences(const std::filesystem::path& path) {
    std::vector<CleanSentence> out;
    jsonl::for_each_record(path, [&](std::size_t, const nlohmann::json& j) {
        CleanSentence s;
        s.id = j.at("id").get<std::uint64_t>();
        s.text = j.at("text").get<std::string>();
        s.word_count = j.at("word_count").get<int>();
        s.source = j.value("source", "");
        out.push_back(std::move(s));
    });
    return out;
}

void save_stats(const std::filesystem::path& path, const CorpusStats& stats) {
    nlohmann::json j{{"total_in", stats.total_in},
                     {"total_kept", stats.total_kept},
                     {"mean_word_count", stats.mean_word_count},
                     {"dropped_short", stats.dropped_short},
                     {"dropped_long", stats.dropped_long},
                     {"dropped_dup", stats.dropped_dup},
                     {"dropped_empty", stats.dropped_empty}};
    std::ofstream out(path);
    if (!out.is_open()) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace toxpair::corpus
