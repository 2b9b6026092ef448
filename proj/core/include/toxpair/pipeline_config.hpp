#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "toxpair/dataset_io.hpp"
#include "toxpair/gateway.hpp"

namespace toxpair::pipeline {

class ConfigError : public Error {
public:
    ConfigError(std::string message, std::vector<std::string> violations)
        : Error(std::move(message)), violations_(std::move(violations)) {}

    const std::vector<std::string>& violations() const { return violations_; }

private:
    std::vector<std::string> violations_;
};

struct CorpusInputs {
    std::filesystem::path comments_path;
    std::string comments_format = "jsonl";
    std::filesystem::path neutral_path;
    std::string neutral_format = "jsonl";
};

struct PromptAssets {
    std::filesystem::path generation;
    std::filesystem::path filters_dir;
    std::filesystem::path geval_dir;
    std::filesystem::path detox_instruction;
};

struct StageVariants {
    std::string default_variant;
    std::vector<std::string> variants;
};

struct EvalSettings {
    std::size_t sample_size = 500;
    std::uint64_t seed = 0;
    std::vector<std::string> criteria;
    bool rank_analysis = true;
    bool perspective = false;
};

struct PerspectiveSettings {
    std::string kind = "mock";  // "mock" | "http"
    std::string endpoint;
    std::string api_key_env;
    std::uint64_t mock_seed = 0;
};

struct PipelineConfig {
    gateway::BackendConfig chat_backend;
    gateway::BackendConfig embed_backend;
    PerspectiveSettings perspective;

    CorpusInputs corpus;
    PromptAssets prompts;

    std::vector<int> n_values = {0, 3, 5, 7, 9};
    bool allow_custom_n = false;

    StageVariants consistency;
    StageVariants offensiveness;

    EvalSettings eval;
    dataset::SplitSpec split;
    std::string assemble_policy = "keep_all";
    std::string language = "ko";
    std::filesystem::path output_dir;

    // Parses + fully validates; throws ConfigError carrying the complete
    // list of violations, never just the first.
    static PipelineConfig validate(const std::filesystem::path& config_path);

    // Forces every backend (chat, embed, perspective) to its mock flavor.
    void force_mock(std::uint64_t seed);

    // Overrides the seeds that shape artifacts (eval, split, mocks).
    void override_seed(std::uint64_t seed);

    // Stable digest over everything that shapes artifacts; used for stage
    // skip markers.
    std::string digest() const;
};

inline const std::vector<int> kAllowedRetrievalCounts = {0, 3, 5, 7, 9};

}  // namespace toxpair::pipeline
