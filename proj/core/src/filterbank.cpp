#include "toxpair/filterbank.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "toxpair/jsonl.hpp"
#include "toxpair/util.hpp"

namespace toxpair::filters {

std::string to_string(Stage stage) {
    return stage == Stage::Consistency ? "consistency" : "offensiveness";
}

Stage stage_from_string(const std::string& name) {
    if (name == "consistency") return Stage::Consistency;
    if (name == "offensiveness") return Stage::Offensiveness;
    throw Error("unknown filter stage: " + name);
}

namespace {

std::vector<std::string> split_pipe_list(const std::string& value) {
    std::vector<std::string> out;
    std::string current;
    std::istringstream in(value);
    while (std::getline(in, current, '|')) {
        std::string item = util::trim(current);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

FilterVariant FilterVariant::parse(const std::string& asset_text) {
    FilterVariant v;
    std::istringstream in(asset_text);
    std::string line;
    bool in_header = true;
    std::string body;
    bool saw_stage = false;

    while (std::getline(in, line)) {
        if (in_header) {
            std::string trimmed = util::trim(line);
            if (trimmed == "---") {
                in_header = false;
                continue;
            }
            if (trimmed.empty() || trimmed[0] == '#') continue;
            auto colon = trimmed.find(':');
            if (colon == std::string::npos) {
                throw Error("bad filter asset header line: " + trimmed);
            }
            std::string key = util::trim(trimmed.substr(0, colon));
            std::string value = util::trim(trimmed.substr(colon + 1));
            if (key == "stage") {
                v.stage = stage_from_string(value);
                saw_stage = true;
            } else if (key == "name") {
                v.name = value;
            } else if (key == "labels") {
                v.labels = split_pipe_list(value);
            } else if (key == "pass") {
                v.pass_labels = split_pipe_list(value);
            } else if (key == "batch_size") {
                v.batch_size = std::stoi(value);
            } else if (key == "numeric") {
                v.numeric_labels = (value == "true" || value == "1");
            } else {
                throw Error("unknown filter asset header key: " + key);
            }
        } else {
            body += line;
            body += '\n';
        }
    }
    v.body = util::trim(body);

    if (!saw_stage) throw Error("filter asset lacks a stage header");
    if (v.name.empty()) throw Error("filter asset lacks a name header");
    if (v.labels.empty()) throw Error("filter asset declares no labels");
    if (v.pass_labels.empty()) throw Error("filter asset declares no pass labels");
    for (const auto& p : v.pass_labels) {
        bool known = std::any_of(v.labels.begin(), v.labels.end(),
                                 [&](const std::string& l) { return util::loose_equal(l, p); });
        if (!known) throw Error("pass label '" + p + "' is not in the label set");
    }
    if (v.batch_size < 1) throw Error("batch_size must be >= 1");
    if (v.body.empty()) throw Error("filter asset lacks a prompt body");
    return v;
}

FilterVariant FilterVariant::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in.is_open()) throw IoError("cannot open filter asset " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
}

bool FilterVariant::passes(const std::string& label) const {
    return std::any_of(pass_labels.begin(), pass_labels.end(),
                       [&](const std::string& p) { return util::loose_equal(p, label); });
}

namespace {

std::string canon(std::string_view text) {
    std::string out;
    bool in_space = false;
    for (unsigned char c : util::trim_view(text)) {
        if (std::isspace(c) != 0) {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty()) out.push_back(' ');
        in_space = false;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

// Leftmost label match in the item text; ties go to the longest label.
std::optional<std::string> match_label(const std::string& content,
                                       std::span<const std::string> label_set) {
    std::string c = canon(content);
    std::size_t best_pos = std::string::npos;
    const std::string* best = nullptr;
    for (const auto& label : label_set) {
        std::string l = canon(label);
        auto pos = c.find(l);
        if (pos == std::string::npos) continue;
        if (pos < best_pos || (pos == best_pos && best && l.size() > canon(*best).size())) {
            best_pos = pos;
            best = &label;
        }
    }
    if (!best) return std::nullopt;
    return *best;
}

std::optional<std::string> match_numeric(const std::string& content) {
    for (std::size_t i = 0; i < content.size(); ++i) {
        if (std::isdigit(static_cast<unsigned char>(content[i])) == 0) continue;
        std::size_t end = i;
        while (end < content.size() && std::isdigit(static_cast<unsigned char>(content[end]))) {
            ++end;
        }
        if (end < content.size() && content[end] == '.' && end + 1 < content.size() &&
            std::isdigit(static_cast<unsigned char>(content[end + 1]))) {
            ++end;
            while (end < content.size() && std::isdigit(static_cast<unsigned char>(content[end]))) {
                ++end;
            }
        }
        return content.substr(i, end - i);
    }
    return std::nullopt;
}

struct Marker {
    int index;
    std::size_t content_start;
    std::size_t marker_start;
};

// An index marker is a digit run at a word boundary followed by '.', ')' or
// ':' and then a non-digit, so decimals like "3.0" inside an item never
// split it.
std::vector<Marker> find_markers(const std::string& raw, int expected_count) {
    std::vector<Marker> markers;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (std::isdigit(static_cast<unsigned char>(raw[i])) == 0) continue;
        if (i > 0 && std::isspace(static_cast<unsigned char>(raw[i - 1])) == 0 &&
            raw[i - 1] != ',' && raw[i - 1] != ';') {
            continue;
        }
        std::size_t end = i;
        while (end < raw.size() && std::isdigit(static_cast<unsigned char>(raw[end]))) ++end;
        if (end >= raw.size()) break;
        char sep = raw[end];
        if (sep != '.' && sep != ')' && sep != ':') {
            i = end;
            continue;
        }
        if (end + 1 < raw.size() && std::isdigit(static_cast<unsigned char>(raw[end + 1])) != 0) {
            i = end;
            continue;
        }
        int index = std::atoi(raw.substr(i, end - i).c_str());
        if (index < 1 || index > expected_count) {
            i = end;
            continue;
        }
        markers.push_back({index, end + 1, i});
        i = end;
    }
    return markers;
}

}  // namespace

std::optional<std::vector<ParsedLabel>> parse_batch_labels(const std::string& raw_judge_text,
                                                           int expected_count,
                                                           std::span<const std::string> label_set,
                                                           bool allow_numeric) {
    if (expected_count < 1) {
        throw std::invalid_argument("expected_count must be >= 1");
    }

    auto resolve = [&](const std::string& content) -> std::optional<std::string> {
        if (auto label = match_label(content, label_set)) return label;
        if (allow_numeric) return match_numeric(content);
        return std::nullopt;
    };

    auto markers = find_markers(raw_judge_text, expected_count);

    if (markers.empty() && expected_count == 1) {
        // Single-item judges commonly answer with the bare label.
        if (auto label = resolve(raw_judge_text)) {
            return std::vector<ParsedLabel>{{1, *label}};
        }
        return std::nullopt;
    }

    if (static_cast<int>(markers.size()) != expected_count) return std::nullopt;

    std::set<int> seen;
    std::vector<ParsedLabel> out(static_cast<std::size_t>(expected_count));
    for (std::size_t m = 0; m < markers.size(); ++m) {
        if (!seen.insert(markers[m].index).second) return std::nullopt;
        std::size_t content_end =
            (m + 1 < markers.size()) ? markers[m + 1].marker_start : raw_judge_text.size();
        std::string content = raw_judge_text.substr(markers[m].content_start,
                                                    content_end - markers[m].content_start);
        auto label = resolve(content);
        if (!label) return std::nullopt;
        out[static_cast<std::size_t>(markers[m].index - 1)] = {markers[m].index, *label};
    }
    return out;
}

std::string classify_multi_meaning_score(double score) {
    if (score >= 2.5 && score <= 4.0) return "Implicit";
    if (score > 4.0 && score <= 5.0) return "Just Negative";
    return "Ambiguous Positive";
}

namespace {

std::string render_batch_body(const FilterVariant& variant,
                              std::span<const gen::GenerationCandidate> pairs) {
    std::string batch;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        batch += std::to_string(i + 1) + ".\nA: " + pairs[i].neutral_text +
                 "\nB: " + pairs[i].toxic_text + "\n";
    }
    std::string body = variant.body;
    auto replace_all = [&body](const std::string& slot, const std::string& value) {
        for (auto pos = body.find(slot); pos != std::string::npos;
             pos = body.find(slot, pos + value.size())) {
            body.replace(pos, slot.size(), value);
        }
    };
    replace_all("{count}", std::to_string(pairs.size()));
    replace_all("{batch}", batch);
    return body;
}

std::vector<FilterVerdict> judge_batch(std::span<const gen::GenerationCandidate> pairs,
                                       const FilterVariant& variant, gateway::Gateway& gateway) {
    if (pairs.empty()) return {};
    if (static_cast<int>(pairs.size()) > variant.batch_size) {
        throw Error("judge batch of " + std::to_string(pairs.size()) + " exceeds the variant's " +
                    std::to_string(variant.batch_size));
    }

    gateway::ChatRequest request;
    request.user_text = render_batch_body(variant, pairs);
    request.temperature = 0.0;  // judging wants determinism
    request.max_tokens = 256;
    request.tag = "filter:stage=" + to_string(variant.stage) + ":variant=" + variant.name +
                  ":count=" + std::to_string(pairs.size());

    std::vector<FilterVerdict> verdicts;
    verdicts.reserve(pairs.size());
    for (const auto& pair : pairs) {
        FilterVerdict v;
        v.neutral_id = pair.neutral_id;
        v.candidate_n = pair.n;
        v.stage = variant.stage;
        v.variant = variant.name;
        verdicts.push_back(std::move(v));
    }

    std::string raw;
    try {
        raw = gateway.chat(request);
    } catch (const std::exception& e) {
        for (auto& v : verdicts) {
            v.unparseable = true;
            v.raw_judge_text = std::string("<gateway error: ") + e.what() + ">";
        }
        return verdicts;
    }

    auto parsed = parse_batch_labels(raw, static_cast<int>(pairs.size()), variant.labels,
                                     variant.numeric_labels);
    if (!parsed) {
        for (auto& v : verdicts) {
            v.unparseable = true;
            v.raw_judge_text = raw;
        }
        return verdicts;
    }

    for (std::size_t i = 0; i < verdicts.size(); ++i) {
        std::string label = (*parsed)[i].label;
        if (variant.numeric_labels) {
            try {
                std::size_t consumed = 0;
                double score = std::stod(label, &consumed);
                if (consumed == label.size()) label = classify_multi_meaning_score(score);
            } catch (const std::exception&) {
            }
        }
        verdicts[i].label = label;
        verdicts[i].pass = variant.passes(label);
        verdicts[i].raw_judge_text = raw;
    }
    return verdicts;
}

}  // namespace

std::vector<FilterVerdict> judge_consistency(std::span<const gen::GenerationCandidate> pairs,
                                             const FilterVariant& variant,
                                             gateway::Gateway& gateway) {
    if (variant.stage != Stage::Consistency) {
        throw Error("variant '" + variant.name + "' is not a consistency variant");
    }
    return judge_batch(pairs, variant, gateway);
}

std::vector<FilterVerdict> judge_offensiveness(std::span<const gen::GenerationCandidate> pairs,
                                               const FilterVariant& variant,
                                               gateway::Gateway& gateway) {
    if (variant.stage != Stage::Offensiveness) {
        throw Error("variant '" + variant.name + "' is not an offensiveness variant");
    }
    return judge_batch(pairs, variant, gateway);
}

StageResult run_stage(std::span<const gen::GenerationCandidate> candidates,
                      const FilterVariant& variant, gateway::Gateway& gateway) {
    StageResult result;
    result.report.stage = variant.stage;
    result.report.variant = variant.name;
    result.report.total_in = candidates.size();

    // The n-fanout of one neutral sentence forms a judge batch, chunked if a
    // group ever exceeds the variant's batch size.
    std::vector<std::pair<std::uint64_t, std::vector<gen::GenerationCandidate>>> groups;
    std::map<std::uint64_t, std::size_t> group_of;
    for (const auto& c : candidates) {
        auto it = group_of.find(c.neutral_id);
        if (it == group_of.end()) {
            group_of.emplace(c.neutral_id, groups.size());
            groups.push_back({c.neutral_id, {c}});
        } else {
            groups[it->second].second.push_back(c);
        }
    }

    for (const auto& [neutral_id, group] : groups) {
        for (std::size_t offset = 0; offset < group.size();
             offset += static_cast<std::size_t>(variant.batch_size)) {
            std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(variant.batch_size),
                                                    group.size() - offset);
            std::span<const gen::GenerationCandidate> chunk(group.data() + offset, len);
            auto verdicts = judge_batch(chunk, variant, gateway);
            for (std::size_t i = 0; i < verdicts.size(); ++i) {
                const auto& v = verdicts[i];
                if (v.pass) {
                    ++result.report.retained;
                    result.survivors.push_back(chunk[i]);
                } else if (v.unparseable) {
                    ++result.report.unparseable;
                } else {
                    ++result.report.rejected;
                }
                result.verdicts.push_back(v);
            }
        }
    }

    if (result.report.total_in > 0) {
        result.report.rate = static_cast<double>(result.report.retained) /
                             static_cast<double>(result.report.total_in);
    }
    return result;
}

StageResult run_intersection(std::span<const gen::GenerationCandidate> candidates,
                             const FilterVariant& first, const FilterVariant& second,
                             gateway::Gateway& gateway) {
    if (first.stage != second.stage) {
        throw Error("intersection variants must share a stage");
    }
    StageResult a = run_stage(candidates, first, gateway);
    StageResult b = run_stage(candidates, second, gateway);

    auto key = [](const gen::GenerationCandidate& c) {
        return std::make_pair(c.neutral_id, c.n);
    };
    std::set<std::pair<std::uint64_t, int>> in_a, in_b;
    for (const auto& c : a.survivors) in_a.insert(key(c));
    for (const auto& c : b.survivors) in_b.insert(key(c));

    std::set<std::pair<std::uint64_t, int>> bad;
    for (const auto& v : a.verdicts) {
        if (v.unparseable) bad.insert({v.neutral_id, v.candidate_n});
    }
    for (const auto& v : b.verdicts) {
        if (v.unparseable) bad.insert({v.neutral_id, v.candidate_n});
    }

    StageResult result;
    result.report.stage = first.stage;
    result.report.variant = first.name + "+" + second.name;
    result.report.total_in = candidates.size();
    result.verdicts = std::move(a.verdicts);
    result.verdicts.insert(result.verdicts.end(), b.verdicts.begin(), b.verdicts.end());

    for (const auto& c : candidates) {
        auto k = key(c);
        if (in_a.count(k) && in_b.count(k)) {
            result.survivors.push_back(c);
            ++result.report.retained;
        } else if (bad.count(k)) {
            ++result.report.unparseable;
        } else {
            ++result.report.rejected;
        }
    }
    if (result.report.total_in > 0) {
        result.report.rate = static_cast<double>(result.report.retained) /
                             static_cast<double>(result.report.total_in);
    }
    return result;
}

void save_verdicts(const std::filesystem::path& path, std::span<const FilterVerdict> verdicts) {
    jsonl::Writer writer(path);
    for (const auto& v : verdicts) {
        writer.write({{"neutral_id", v.neutral_id},
                      {"candidate_n", v.candidate_n},
                      {"stage", to_string(v.stage)},
                      {"variant", v.variant},
                      {"label", v.label},
                      {"pass", v.pass},
                      {"unparseable", v.unparseable},
                      {"raw", v.raw_judge_text}});
    }
}

std::vector<FilterVerdict> load_verdicts(const std::filesystem::path& path) {
    std::vector<FilterVerdict> out;
    jsonl::for_each_record(path, [&](std::size_t, const nlohmann::json& j) {
        FilterVerdict v;
        v.neutral_id = j.at("neutral_id").get<std::uint64_t>();
        v.candidate_n = j.at("candidate_n").get<int>();
        v.stage = stage_from_string(j.at("stage").get<std::string>());
        v.variant = j.at("variant").get<std::string>();
        v.label = j.at("label").get<std::string>();
        v.pass = j.at("pass").get<bool>();
        v.unparseable = j.at("unparseable").get<bool>();
        v.raw_judge_text = j.value("raw", "");
        out.push_back(std::move(v));
    });
    return out;
}

void save_report(const std::filesystem::path& path, const RetentionReport& report) {
    nlohmann::json j{{"stage", to_string(report.stage)}, {"variant", report.variant},
                     {"total_in", report.total_in},     {"retained", report.retained},
                     {"rejected", report.rejected},     {"unparseable", report.unparseable},
                     {"rate", report.rate}};
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out.is_open()) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace toxpair::filters
