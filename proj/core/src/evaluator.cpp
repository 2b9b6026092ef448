#include "toxpair/evaluator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "toxpair/jsonl.hpp"
#include "toxpair/util.hpp"

namespace toxpair::eval {

Criterion Criterion::load(const std::string& name, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in.is_open()) throw IoError("cannot open criterion asset " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    Criterion c;
    c.name = name;
    c.prompt_text = util::trim(buffer.str());
    c.requires_pair = (name == "consistency");
    if (c.prompt_text.empty()) throw Error("criterion asset is empty: " + path.string());
    return c;
}

std::optional<int> parse_score(const std::string& reply) {
    std::string first_line = reply.substr(0, reply.find('\n'));
    for (std::size_t i = 0; i < first_line.size(); ++i) {
        if (std::isdigit(static_cast<unsigned char>(first_line[i])) == 0) continue;
        std::size_t end = i;
        while (end < first_line.size() &&
               std::isdigit(static_cast<unsigned char>(first_line[end]))) {
            ++end;
        }
        // Skip decimals like "4.5"; the scale is integer.
        if (end < first_line.size() && first_line[end] == '.' && end + 1 < first_line.size() &&
            std::isdigit(static_cast<unsigned char>(first_line[end + 1])) != 0) {
            i = end + 1;
            while (i < first_line.size() && std::isdigit(static_cast<unsigned char>(first_line[i]))) {
                ++i;
            }
            continue;
        }
        try {
            return std::stoi(first_line.substr(i, end - i));
        } catch (const std::exception&) {
            return std::nullopt;
        }
    }
    return std::nullopt;
}

AggregateReport aggregate(const std::string& criterion, std::span<const int> scores) {
    AggregateReport report;
    report.criterion = criterion;
    report.n = scores.size();
    if (scores.empty()) return report;

    double mean = 0.0;
    double m2 = 0.0;
    std::size_t count = 0;
    for (int s : scores) {
        ++count;
        double delta = static_cast<double>(s) - mean;
        mean += delta / static_cast<double>(count);
        m2 += delta * (static_cast<double>(s) - mean);
    }
    report.mean = mean;
    if (count > 1) {
        double variance = m2 / static_cast<double>(count - 1);
        report.std_error = std::sqrt(variance) / std::sqrt(static_cast<double>(count));
    }
    return report;
}

std::vector<std::size_t> sample_indices(std::size_t population, std::size_t sample_size,
                                        std::uint64_t seed) {
    if (sample_size > population) {
        throw Error("sample_size exceeds the population");
    }
    std::vector<std::size_t> indices(population);
    for (std::size_t i = 0; i < population; ++i) indices[i] = i;
    util::SplitMix64 rng(seed ^ 0xa076bc9c2d896e3bULL);
    for (std::size_t i = 0; i < sample_size; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng.next_below(population - i));
        std::swap(indices[i], indices[j]);
    }
    indices.resize(sample_size);
    return indices;
}

namespace {

gateway::ChatRequest score_request(const Criterion& criterion,
                                   const dataset::PairedSample& sample, bool strict_retry) {
    gateway::ChatRequest request;
    request.temperature = 0.0;
    request.max_tokens = 64;
    request.tag = "eval:criterion=" + criterion.name;

    std::string body = criterion.prompt_text;
    body += "\n\n";
    if (criterion.requires_pair) {
        body += "Input sentence: " + sample.neutral_text + "\n";
        body += "Actual output: " + sample.toxic_text + "\n";
    } else {
        body += "Sentence: " + sample.toxic_text + "\n";
    }
    if (strict_retry) {
        body += "\nAnswer with a single integer from 1 to 5 and nothing else.\n";
    } else {
        body += "\nScore (1-5):\n";
    }
    request.user_text = body;
    return request;
}

}  // namespace

GEvalResult g_eval(std::span<const dataset::PairedSample> samples, const Criterion& criterion,
                   gateway::Gateway& gateway, std::size_t sample_size, std::uint64_t seed) {
    auto chosen = sample_indices(samples.size(), sample_size, seed);

    GEvalResult result;
    std::vector<int> scores;
    for (std::size_t idx : chosen) {
        const auto& sample = samples[idx];
        std::optional<int> score;
        std::string raw;
        for (int attempt = 0; attempt < 2 && !score; ++attempt) {
            try {
                raw = gateway.chat(score_request(criterion, sample, attempt > 0));
            } catch (const std::exception& e) {
                raw = std::string("<gateway error: ") + e.what() + ">";
                continue;
            }
            auto parsed = parse_score(raw);
            if (parsed && *parsed >= 1 && *parsed <= 5) score = parsed;
        }
        if (!score) {
            ++result.dropped;
            continue;
        }
        result.records.push_back({idx, criterion.name, *score, raw});
        scores.push_back(*score);
    }
    if (scores.empty()) {
        throw EmptyAfterDrop("no scoreable samples for criterion " + criterion.name);
    }
    result.report = aggregate(criterion.name, scores);
    return result;
}

bool is_permutation_1_to_n(std::span<const int> ranks) {
    std::vector<bool> seen(ranks.size(), false);
    for (int r : ranks) {
        if (r < 1 || static_cast<std::size_t>(r) > ranks.size()) return false;
        if (seen[static_cast<std::size_t>(r - 1)]) return false;
        seen[static_cast<std::size_t>(r - 1)] = true;
    }
    return true;
}

namespace {

std::optional<std::vector<int>> parse_ranks(const std::string& reply, std::size_t count) {
    std::vector<int> ranks;
    std::string current;
    for (char c : reply + " ") {
        if (std::isdigit(static_cast<unsigned char>(c)) != 0) {
            current.push_back(c);
        } else if (!current.empty()) {
            ranks.push_back(std::atoi(current.c_str()));
            current.clear();
        }
    }
    if (ranks.size() != count) return std::nullopt;
    if (!is_permutation_1_to_n(ranks)) return std::nullopt;
    return ranks;
}

}  // namespace

RankHistogram rank_retrievals(std::span<const std::vector<gen::GenerationCandidate>> groups,
                              gateway::Gateway& gateway) {
    RankHistogram hist;
    for (const auto& group : groups) {
        if (group.empty() || group.size() > 5) {
            throw Error("rank groups must hold 1..5 candidates");
        }
        if (hist.n_values.empty()) {
            for (const auto& c : group) hist.n_values.push_back(c.n);
        }

        gateway::ChatRequest request;
        request.temperature = 0.0;
        request.max_tokens = 64;
        request.tag = "rank:count=" + std::to_string(group.size());
        std::string body =
            "Rank the following rewrites of one sentence by implicit offensiveness, "
            "1st being the most aligned. Reply with one rank per rewrite, in order, "
            "as a comma-separated permutation of 1.." +
            std::to_string(group.size()) + ".\n\n";
        body += "Original: " + group.front().neutral_text + "\n";
        for (std::size_t i = 0; i < group.size(); ++i) {
            body += "Rewrite " + std::to_string(i + 1) + ": " + group[i].toxic_text + "\n";
        }
        request.user_text = body;

        std::optional<std::vector<int>> ranks;
        try {
            ranks = parse_ranks(gateway.chat(request), group.size());
        } catch (const std::exception&) {
            ranks = std::nullopt;
        }
        if (!ranks) {
            ++hist.groups_skipped;
            continue;
        }
        for (std::size_t i = 0; i < group.size(); ++i) {
            auto& row = hist.counts[group[i].n];
            ++row[static_cast<std::size_t>((*ranks)[i] - 1)];
        }
        ++hist.groups_ranked;
    }
    return hist;
}

void save_scores(const std::filesystem::path& path, std::span<const ScoreRecord> records) {
    jsonl::Writer writer(path);
    for (const auto& r : records) {
        writer.write({{"sample_id", r.sample_id},
                      {"criterion", r.criterion},
                      {"score", r.score},
                      {"raw", r.raw_judge_text}});
    }
}

void save_aggregates(const std::filesystem::path& path,
                     std::span<const AggregateReport> reports) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : reports) {
        out.push_back({{"criterion", r.criterion}, {"n", r.n}, {"mean", r.mean},
                       {"stderr", r.std_error}});
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream file(path);
    if (!file.is_open()) throw IoError("cannot write " + path.string());
    file << out.dump(2) << '\n';
}

}  // namespace toxpair::eval
