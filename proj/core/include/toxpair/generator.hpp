#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "toxpair/corpus.hpp"
#include "toxpair/gateway.hpp"
#include "toxpair/prompt_template.hpp"
#include "toxpair/vector_index.hpp"

namespace toxpair::gen {

inline const std::vector<int> kDefaultRetrievalCounts = {0, 3, 5, 7, 9};

struct GenerationCandidate {
    std::uint64_t neutral_id = 0;
    std::string neutral_text;
    int n = 0;                                 // retrieval count this candidate used
    std::vector<std::uint64_t> retrieved_ids;  // exactly n ids, rank order
    std::string toxic_text;
    std::string backend_tag;
};

struct GenerationFailure {
    std::uint64_t neutral_id = 0;
    int n = 0;
    std::string error;
};

struct GenerationBatch {
    std::vector<GenerationCandidate> candidates;  // ordered by n
    std::vector<GenerationFailure> failures;
};

struct GenerationOptions {
    std::vector<int> n_values = kDefaultRetrievalCounts;
    double temperature = 1.0;  // generation wants diversity
    int max_tokens = 512;
    std::size_t fanout_threads = 5;
};

// Retrieval hands back sentence ids; the prompt needs the comment texts.
using CommentTexts = std::unordered_map<std::uint64_t, std::string>;
CommentTexts make_comment_lookup(std::span<const corpus::CleanSentence> comments);

// Builds the chat request for one (neutral, retrieved comments) pair.
gateway::ChatRequest assemble_prompt(const PromptTemplate& tmpl, const std::string& neutral_text,
                                     const std::vector<std::string>& retrieved_comments,
                                     double temperature = 1.0, int max_tokens = 512,
                                     std::string tag = "generate");

// One candidate per n value, all forwarded downstream; a failing n is
// recorded and must not lose the other candidates.
GenerationBatch generate_for(const corpus::CleanSentence& neutral,
                             const retrieval::VectorIndex& index, gateway::Gateway& gateway,
                             const PromptTemplate& tmpl, const CommentTexts& comment_texts,
                             const GenerationOptions& options = {});

using CandidateSink = std::function<void(const GenerationCandidate&)>;

struct BatchGenerateStats {
    std::uint64_t neutrals_processed = 0;
    std::uint64_t neutrals_skipped = 0;  // already checkpointed
    std::vector<GenerationFailure> failures;
};

// Resumable fan-out over a sentence list. Completed neutral ids are appended
// to the checkpoint (one JSON object per line); on restart those sentences
// are skipped without touching the backend. A checkpoint that fails to parse
// raises IoError rather than silently restarting from zero. Candidates reach
// the sink ordered by (neutral_id, n).
BatchGenerateStats batch_generate(std::span<const corpus::CleanSentence> neutrals,
                                  const retrieval::VectorIndex& index, gateway::Gateway& gateway,
                                  const PromptTemplate& tmpl, const CommentTexts& comment_texts,
                                  const std::filesystem::path& checkpoint_path,
                                  const CandidateSink& sink,
                                  const GenerationOptions& options = {});

// Candidate JSONL round-trip used by the pipeline artifacts.
void save_candidates(const std::filesystem::path& path,
                     std::span<const GenerationCandidate> candidates);
std::vector<GenerationCandidate> load_candidates(const std::filesystem::path& path);

}  // namespace toxpair::gen
