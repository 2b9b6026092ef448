#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include <nlohmann/json.hpp>

#include "toxpair/errors.hpp"

namespace toxpair::jsonl {

// Calls fn(line_number, parsed) for every non-empty line that parses as
// JSON; returns the number of lines skipped as malformed. Throws IoError if
// the file cannot be opened.
std::size_t for_each_record(const std::filesystem::path& path,
                            const std::function<void(std::size_t, const nlohmann::json&)>& fn);

// Line-buffered JSONL writer with LF endings and UTF-8 passthrough.
class Writer {
public:
    explicit Writer(const std::filesystem::path& path, bool append = false);

    void write(const nlohmann::json& record);
    void flush();

private:
    std::ofstream out_;
    std::filesystem::path path_;
};

}  // namespace toxpair::jsonl
