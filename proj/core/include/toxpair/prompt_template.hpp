#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "toxpair/errors.hpp"

namespace toxpair::gen {

class TemplateError : public Error {
public:
    using Error::Error;
};

inline constexpr const char* kCommentsSlot = "{community_comments}";
inline constexpr const char* kInputSlot = "{input_sentence}";
inline constexpr const char* kEmptyCommentsMarker = "(no community comments retrieved)";

// Generation prompt asset: named [guidelines] / [task] / [examples] /
// [query] blocks; the query block carries both substitution slots exactly
// once. The examples block must hold exactly three shots unless the caller
// overrides (more shots push outputs toward one community's tone).
struct PromptTemplate {
    std::string guidelines_block;
    std::string task_block;
    std::string examples_block;
    std::string query_block;

    static PromptTemplate load(const std::filesystem::path& path,
                               bool allow_any_shot_count = false);
    static PromptTemplate parse(const std::string& asset_text,
                                bool allow_any_shot_count = false);

    int shot_count() const;

    // Single-pass slot substitution over the query block; substituted values
    // are never rescanned, so slot-shaped input text stays literal data.
    std::string render_user_text(const std::string& neutral_text,
                                 const std::vector<std::string>& retrieved_comments) const;
};

}  // namespace toxpair::gen
