#include "toxpair/generator.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "toxpair/jsonl.hpp"
#include "toxpair/util.hpp"

namespace toxpair::gen {

CommentTexts make_comment_lookup(std::span<const corpus::CleanSentence> comments) {
    CommentTexts lookup;
    lookup.reserve(comments.size());
    for (const auto& c : comments) lookup.emplace(c.id, c.text);
    return lookup;
}

gateway::ChatRequest assemble_prompt(const PromptTemplate& tmpl, const std::string& neutral_text,
                                     const std::vector<std::string>& retrieved_comments,
                                     double temperature, int max_tokens, std::string tag) {
    gateway::ChatRequest request;
    request.system_text = tmpl.guidelines_block;
    request.user_text = tmpl.render_user_text(neutral_text, retrieved_comments);
    request.temperature = temperature;
    request.max_tokens = max_tokens;
    request.tag = std::move(tag);
    return request;
}

GenerationBatch generate_for(const corpus::CleanSentence& neutral,
                             const retrieval::VectorIndex& index, gateway::Gateway& gateway,
                             const PromptTemplate& tmpl, const CommentTexts& comment_texts,
                             const GenerationOptions& options) {
    if (options.n_values.empty()) {
        throw Error("n_values must be non-empty");
    }
    for (int n : options.n_values) {
        if (n < 0 || static_cast<std::size_t>(n) > index.size()) {
            throw Error("retrieval count " + std::to_string(n) + " exceeds index size");
        }
    }

    GenerationBatch batch;
    std::mutex batch_mutex;

    // A retrieval failure only dooms the n > 0 candidates; n = 0 needs no
    // context and still runs.
    int max_n = *std::max_element(options.n_values.begin(), options.n_values.end());
    std::vector<retrieval::RetrievalHit> hits;
    std::string retrieval_error;
    if (max_n > 0) {
        try {
            hits = index.query(neutral.text, max_n, gateway);
        } catch (const std::exception& e) {
            retrieval_error = e.what();
        }
    }

    util::parallel_for(options.n_values.size(), options.fanout_threads, [&](std::size_t i) {
        int n = options.n_values[i];
        if (n > 0 && !retrieval_error.empty()) {
            std::lock_guard<std::mutex> lock(batch_mutex);
            batch.failures.push_back({neutral.id, n, "retrieval failed: " + retrieval_error});
            return;
        }
        try {
            GenerationCandidate candidate;
            candidate.neutral_id = neutral.id;
            candidate.neutral_text = neutral.text;
            candidate.n = n;

            std::vector<std::string> comments;
            comments.reserve(static_cast<std::size_t>(n));
            for (int r = 0; r < n; ++r) {
                std::uint64_t id = hits[static_cast<std::size_t>(r)].sentence_id;
                auto it = comment_texts.find(id);
                if (it == comment_texts.end()) {
                    throw Error("retrieved comment id " + std::to_string(id) +
                                " has no text in the lookup");
                }
                candidate.retrieved_ids.push_back(id);
                comments.push_back(it->second);
            }

            std::string tag = "generate:neutral=" + std::to_string(neutral.id) +
                              ":n=" + std::to_string(n);
            auto request = assemble_prompt(tmpl, neutral.text, comments, options.temperature,
                                           options.max_tokens, tag);
            std::string toxic = gateway.chat(request);
            if (util::trim_view(toxic).empty()) {
                throw Error("backend returned empty text");
            }
            candidate.toxic_text = std::move(toxic);
            candidate.backend_tag = gateway.chat_fingerprint();

            std::lock_guard<std::mutex> lock(batch_mutex);
            batch.candidates.push_back(std::move(candidate));
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(batch_mutex);
            batch.failures.push_back({neutral.id, n, e.what()});
        }
    });

    auto by_n = [](const auto& a, const auto& b) { return a.n < b.n; };
    std::sort(batch.candidates.begin(), batch.candidates.end(), by_n);
    std::sort(batch.failures.begin(), batch.failures.end(), by_n);
    return batch;
}

namespace {

std::unordered_set<std::uint64_t> load_checkpoint(const std::filesystem::path& path) {
    std::unordered_set<std::uint64_t> done;
    if (!std::filesystem::exists(path)) return done;

    std::ifstream in(path);
    if (!in.is_open()) throw IoError("cannot open checkpoint " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (util::trim_view(line).empty()) continue;
        nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.contains("neutral_id") ||
            !record["neutral_id"].is_number_unsigned()) {
            throw IoError("corrupt checkpoint at " + path.string() + ":" +
                          std::to_string(line_no) + "; refusing to restart from zero");
        }
        done.insert(record["neutral_id"].get<std::uint64_t>());
    }
    return done;
}

}  // namespace

BatchGenerateStats batch_generate(std::span<const corpus::CleanSentence> neutrals,
                                  const retrieval::VectorIndex& index, gateway::Gateway& gateway,
                                  const PromptTemplate& tmpl, const CommentTexts& comment_texts,
                                  const std::filesystem::path& checkpoint_path,
                                  const CandidateSink& sink, const GenerationOptions& options) {
    auto done = load_checkpoint(checkpoint_path);

    if (checkpoint_path.has_parent_path()) {
        std::filesystem::create_directories(checkpoint_path.parent_path());
    }
    std::ofstream checkpoint(checkpoint_path, std::ios::app);
    if (!checkpoint.is_open()) {
        throw IoError("cannot append to checkpoint " + checkpoint_path.string());
    }

    BatchGenerateStats stats;
    for (const auto& neutral : neutrals) {
        if (done.count(neutral.id)) {
            ++stats.neutrals_skipped;
            continue;
        }
        GenerationBatch batch =
            generate_for(neutral, index, gateway, tmpl, comment_texts, options);
        for (const auto& candidate : batch.candidates) sink(candidate);
        for (auto& failure : batch.failures) stats.failures.push_back(std::move(failure));

        checkpoint << nlohmann::json{{"neutral_id", neutral.id}}.dump() << '\n';
        checkpoint.flush();
        if (!checkpoint) throw IoError("checkpoint write failed: " + checkpoint_path.string());
        ++stats.neutrals_processed;
    }
    return stats;
}

void save_candidates(const std::filesystem::path& path,
                     std::span<const GenerationCandidate> candidates) {
    jsonl::Writer writer(path);
    for (const auto& c : candidates) {
        writer.write({{"neutral_id", c.neutral_id},
                      {"neutral_text", c.neutral_text},
                      {"n", c.n},
                      {"retrieved_ids", c.retrieved_ids},
                      {"toxic_text", c.toxic_text},
                      {"backend_tag", c.backend_tag}});
    }
}

std::vector<GenerationCandidate> load_candidates(const std::filesystem::path& path) {
    std::vector<GenerationCandidate> out;
    jsonl::for_each_record(path, [&](std::size_t, const nlohmann::json& j) {
        GenerationCandidate c;
        c.neutral_id = j.at("neutral_id").get<std::uint64_t>();
        c.neutral_text = j.at("neutral_text").get<std::string>();
        c.n = j.at("n").get<int>();
        c.retrieved_ids = j.at("retrieved_ids").get<std::vector<std::uint64_t>>();
        c.toxic_text = j.at("toxic_text").get<std::string>();
        c.backend_tag = j.value("backend_tag", "");
        out.push_back(std::move(c));
    });
    return out;
}

}  // namespace toxpair::gen
