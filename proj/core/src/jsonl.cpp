#include "toxpair/jsonl.hpp"

#include "toxpair/util.hpp"

namespace toxpair::jsonl {

std::size_t for_each_record(const std::filesystem::path& path,
                            const std::function<void(std::size_t, const nlohmann::json&)>& fn) {
    std::ifstream in(path);
    if (!in.is_open()) {
        throw IoError("cannot open " + path.string());
    }
    std::string line;
    std::size_t line_no = 0;
    std::size_t skipped = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (util::trim_view(line).empty()) continue;
        nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
        if (record.is_discarded()) {
            ++skipped;
            continue;
        }
        fn(line_no, record);
    }
    return skipped;
}

Writer::Writer(const std::filesystem::path& path, bool append) : path_(path) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    out_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!out_.is_open()) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
}

void Writer::write(const nlohmann::json& record) {
    out_ << record.dump() << '\n';
    if (!out_) {
        throw IoError("write failed on " + path_.string());
    }
}

void Writer::flush() { out_.flush(); }

}  // namespace toxpair::jsonl
