#include "toxpair/prompt_template.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "toxpair/util.hpp"

namespace toxpair::gen {

namespace {

std::map<std::string, std::string> split_blocks(const std::string& text) {
    std::map<std::string, std::string> blocks;
    std::istringstream in(text);
    std::string line;
    std::string current;
    std::string body;
    auto commit = [&] {
        if (!current.empty()) blocks[current] = util::trim(body);
        body.clear();
    };
    while (std::getline(in, line)) {
        std::string trimmed = util::trim(line);
        if (trimmed.size() > 2 && trimmed.front() == '[' && trimmed.back() == ']') {
            commit();
            current = trimmed.substr(1, trimmed.size() - 2);
            continue;
        }
        body += line;
        body += '\n';
    }
    commit();
    return blocks;
}

std::size_t count_occurrences(const std::string& haystack, const std::string& needle) {
    std::size_t count = 0;
    for (auto pos = haystack.find(needle); pos != std::string::npos;
         pos = haystack.find(needle, pos + needle.size())) {
        ++count;
    }
    return count;
}

}  // namespace

PromptTemplate PromptTemplate::parse(const std::string& asset_text, bool allow_any_shot_count) {
    auto blocks = split_blocks(asset_text);
    for (const char* required : {"guidelines", "task", "examples", "query"}) {
        if (!blocks.count(required)) {
            throw TemplateError(std::string("prompt asset missing [") + required + "] block");
        }
    }
    PromptTemplate t;
    t.guidelines_block = blocks["guidelines"];
    t.task_block = blocks["task"];
    t.examples_block = blocks["examples"];
    t.query_block = blocks["query"];

    for (const char* slot : {kCommentsSlot, kInputSlot}) {
        if (count_occurrences(t.query_block, slot) != 1) {
            throw TemplateError(std::string("query block must contain ") + slot + " exactly once");
        }
        for (const std::string* other : {&t.guidelines_block, &t.task_block, &t.examples_block}) {
            if (other->find(slot) != std::string::npos) {
                throw TemplateError(std::string("slot ") + slot + " may only appear in [query]");
            }
        }
    }
    if (!allow_any_shot_count && t.shot_count() != 3) {
        throw TemplateError("examples block must contain exactly 3 shots, found " +
                            std::to_string(t.shot_count()));
    }
    return t;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path, bool allow_any_shot_count) {
    std::ifstream in(path);
    if (!in.is_open()) throw IoError("cannot open prompt asset " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str(), allow_any_shot_count);
}

int PromptTemplate::shot_count() const {
    return static_cast<int>(count_occurrences(examples_block, "<Example"));
}

std::string PromptTemplate::render_user_text(
    const std::string& neutral_text, const std::vector<std::string>& retrieved_comments) const {
    std::string comments;
    if (retrieved_comments.empty()) {
        comments = kEmptyCommentsMarker;
    } else {
        for (std::size_t i = 0; i < retrieved_comments.size(); ++i) {
            if (i) comments += '\n';
            comments += retrieved_comments[i];
        }
    }

    std::string query = query_block;
    auto splice = [&query](const char* slot, const std::string& value) {
        auto pos = query.find(slot);
        query.replace(pos, std::string(slot).size(), value);
        return pos + value.size();
    };
    // Replace the later slot first so the earlier offset stays valid, and
    // skip past the spliced value so it is never rescanned.
    auto comments_pos = query.find(kCommentsSlot);
    auto input_pos = query.find(kInputSlot);
    if (comments_pos < input_pos) {
        splice(kInputSlot, neutral_text);
        splice(kCommentsSlot, comments);
    } else {
        splice(kCommentsSlot, comments);
        splice(kInputSlot, neutral_text);
    }

    return task_block + "\n\n" + examples_block + "\n\n" + query;
}

}  // namespace toxpair::gen
