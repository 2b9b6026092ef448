#include "toxpair/pipeline_config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "toxpair/evaluator.hpp"
#include "toxpair/filterbank.hpp"
#include "toxpair/util.hpp"

namespace toxpair::pipeline {

namespace {

using nlohmann::json;

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
    std::filesystem::path p(value);
    return p.is_absolute() ? p : base / p;
}

gateway::BackendKind backend_kind(const std::string& kind, std::vector<std::string>& violations,
                                  const std::string& where) {
    if (kind == "mock") return gateway::BackendKind::Mock;
    if (kind == "http-chat") return gateway::BackendKind::HttpChat;
    if (kind == "http-embed") return gateway::BackendKind::HttpEmbed;
    violations.push_back(where + ": unknown backend kind '" + kind + "'");
    return gateway::BackendKind::Mock;
}

gateway::BackendConfig parse_backend(const json& j, const std::string& where, bool is_chat,
                                     std::vector<std::string>& violations) {
    gateway::BackendConfig config;
    config.kind = backend_kind(j.value("kind", "mock"), violations, where);
    config.endpoint = j.value("endpoint", "");
    config.model = j.value("model", "");
    config.auth_env = j.value("auth_env", "");
    config.retry.max_attempts = j.value("max_attempts", 3);
    config.retry.base_delay_ms = j.value("base_delay_ms", 250);
    config.concurrency = j.value("concurrency", 4);
    config.mock_behavior = j.value("mock_behavior", is_chat ? "pipeline" : "echo");
    config.mock_seed = j.value("mock_seed", std::uint64_t{0});
    config.mock_dimension = j.value("mock_dimension", 64);
    if (!is_chat) config.mock_behavior = "echo";

    try {
        config.validate();
    } catch (const std::exception& e) {
        violations.push_back(where + ": " + e.what());
    }
    if (is_chat && config.kind == gateway::BackendKind::HttpEmbed) {
        violations.push_back(where + ": chat backend cannot be http-embed");
    }
    if (!is_chat && config.kind == gateway::BackendKind::HttpChat) {
        violations.push_back(where + ": embed backend cannot be http-chat");
    }
    return config;
}

void check_file(const std::filesystem::path& path, const std::string& what,
                std::vector<std::string>& violations) {
    if (!std::filesystem::exists(path)) {
        violations.push_back(what + " does not exist: " + path.string());
    }
}

}  // namespace

PipelineConfig PipelineConfig::validate(const std::filesystem::path& config_path) {
    std::ifstream in(config_path);
    if (!in.is_open()) {
        throw IoError("cannot open config " + config_path.string());
    }
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ConfigError("config is not a JSON object: " + config_path.string(),
                          {"config must be a JSON object"});
    }

    std::vector<std::string> violations;
    std::filesystem::path base = config_path.has_parent_path()
                                     ? config_path.parent_path()
                                     : std::filesystem::path(".");

    PipelineConfig config;

    const json backends = j.value("backends", json::object());
    config.chat_backend =
        parse_backend(backends.value("chat", json::object()), "backends.chat", true, violations);
    config.embed_backend =
        parse_backend(backends.value("embed", json::object()), "backends.embed", false, violations);
    if (backends.contains("perspective")) {
        const json& p = backends["perspective"];
        config.perspective.kind = p.value("kind", "mock");
        config.perspective.endpoint = p.value("endpoint", "");
        config.perspective.api_key_env = p.value("api_key_env", "");
        config.perspective.mock_seed = p.value("mock_seed", std::uint64_t{0});
        if (config.perspective.kind != "mock" && config.perspective.kind != "http") {
            violations.push_back("backends.perspective: kind must be 'mock' or 'http'");
        }
        if (config.perspective.kind == "http" && config.perspective.endpoint.empty()) {
            violations.push_back("backends.perspective: http kind requires an endpoint");
        }
    }

    if (!j.contains("corpus") || !j["corpus"].is_object()) {
        violations.push_back("corpus section is required");
    } else {
        const json& c = j["corpus"];
        config.corpus.comments_path = resolve(base, c.value("comments_path", ""));
        config.corpus.comments_format = c.value("comments_format", "jsonl");
        config.corpus.neutral_path = resolve(base, c.value("neutral_path", ""));
        config.corpus.neutral_format = c.value("neutral_format", "jsonl");
        check_file(config.corpus.comments_path, "corpus.comments_path", violations);
        check_file(config.corpus.neutral_path, "corpus.neutral_path", violations);
        for (const auto* fmt : {&config.corpus.comments_format, &config.corpus.neutral_format}) {
            if (*fmt != "jsonl" && *fmt != "csv") {
                violations.push_back("corpus format must be jsonl or csv, got '" + *fmt + "'");
            }
        }
    }

    const json prompts = j.value("prompts", json::object());
    config.prompts.generation = resolve(base, prompts.value("generation", "assets/generation_prompt.txt"));
    config.prompts.filters_dir = resolve(base, prompts.value("filters_dir", "assets/filters"));
    config.prompts.geval_dir = resolve(base, prompts.value("geval_dir", "assets/geval"));
    config.prompts.detox_instruction =
        resolve(base, prompts.value("detox_instruction", "assets/detox_instruction.txt"));
    check_file(config.prompts.generation, "prompts.generation", violations);
    check_file(config.prompts.detox_instruction, "prompts.detox_instruction", violations);

    config.n_values = j.value("n_values", std::vector<int>{0, 3, 5, 7, 9});
    config.allow_custom_n = j.value("allow_custom_n", false);
    if (config.n_values.empty()) {
        violations.push_back("n_values must be non-empty");
    }
    if (!config.allow_custom_n) {
        for (int n : config.n_values) {
            if (std::find(kAllowedRetrievalCounts.begin(), kAllowedRetrievalCounts.end(), n) ==
                kAllowedRetrievalCounts.end()) {
                violations.push_back("n_values contains " + std::to_string(n) +
                                     ", outside {0,3,5,7,9}; set allow_custom_n to override");
            }
        }
    }

    auto parse_stage = [&](const char* stage_name, StageVariants& out,
                           const std::string& fallback_default) {
        json stage = j.value("filters", json::object()).value(stage_name, json::object());
        out.default_variant = stage.value("default", fallback_default);
        out.variants = stage.value("variants", std::vector<std::string>{out.default_variant});
        std::set<std::string> unique(out.variants.begin(), out.variants.end());
        if (unique.size() != out.variants.size()) {
            violations.push_back(std::string("filters.") + stage_name + ": duplicate variants");
        }
        if (!unique.count(out.default_variant) && out.default_variant != "intersection") {
            violations.push_back(std::string("filters.") + stage_name + ": default variant '" +
                                 out.default_variant + "' is not in the variant list");
        }
        auto check_variant_asset = [&](const std::string& name) {
            auto path = config.prompts.filters_dir / (name + ".txt");
            if (!std::filesystem::exists(path)) {
                violations.push_back(std::string("filters.") + stage_name + ": asset missing for '" +
                                     name + "': " + path.string());
                return;
            }
            try {
                auto variant = filters::FilterVariant::load(path);
                if (filters::to_string(variant.stage) != stage_name) {
                    violations.push_back(std::string("filters.") + stage_name + ": asset '" + name +
                                         "' declares stage " + filters::to_string(variant.stage));
                }
            } catch (const std::exception& e) {
                violations.push_back(std::string("filters.") + stage_name + ": asset '" + name +
                                     "' failed to parse: " + e.what());
            }
        };
        for (const auto& name : out.variants) check_variant_asset(name);
        if (out.default_variant == "intersection") {
            // Intersection composes the two pair-consistency prompts.
            for (const char* needed : {"context-shift", "qa-and-paraphrasing"}) {
                if (!unique.count(needed)) check_variant_asset(needed);
            }
        }
    };
    parse_stage("consistency", config.consistency, "context-shift");
    parse_stage("offensiveness", config.offensiveness, "derogatory-detection");

    const json eval = j.value("eval", json::object());
    config.eval.sample_size = eval.value("sample_size", std::size_t{500});
    config.eval.seed = eval.value("seed", std::uint64_t{0});
    config.eval.criteria = eval.value(
        "criteria", std::vector<std::string>{"overall_offensiveness", "implicit_offensiveness",
                                             "consistency", "fluency"});
    config.eval.rank_analysis = eval.value("rank_analysis", true);
    config.eval.perspective = eval.value("perspective", false);
    if (config.eval.sample_size == 0) {
        violations.push_back("eval.sample_size must be >= 1");
    }
    for (const auto& name : config.eval.criteria) {
        if (std::find(eval::kCriterionNames.begin(), eval::kCriterionNames.end(), name) ==
            eval::kCriterionNames.end()) {
            violations.push_back("eval.criteria contains unknown criterion '" + name + "'");
        } else {
            check_file(config.prompts.geval_dir / (name + ".txt"), "geval asset for " + name,
                       violations);
        }
    }

    const json split = j.value("split", json::object());
    config.split.train = split.value("train", 0.8);
    config.split.val = split.value("val", 0.1);
    config.split.test = split.value("test", 0.1);
    config.split.seed = split.value("seed", std::uint64_t{0});
    std::string rounding = split.value("rounding", "tidy-holdout");
    if (rounding == "floor") {
        config.split.rounding = dataset::SplitSpec::Rounding::Floor;
    } else if (rounding == "tidy-holdout") {
        config.split.rounding = dataset::SplitSpec::Rounding::TidyHoldout;
    } else {
        violations.push_back("split.rounding must be 'floor' or 'tidy-holdout'");
    }
    try {
        config.split.validate();
    } catch (const std::exception& e) {
        violations.push_back(std::string("split: ") + e.what());
    }

    config.assemble_policy = j.value("assemble_policy", "keep_all");
    if (config.assemble_policy != "keep_all" && config.assemble_policy != "best_one") {
        violations.push_back("assemble_policy must be 'keep_all' or 'best_one'");
    }
    config.language = j.value("language", "ko");

    std::string out_dir = j.value("output_dir", "");
    if (out_dir.empty()) {
        violations.push_back("output_dir is required");
    } else {
        config.output_dir = resolve(base, out_dir);
    }

    if (!violations.empty()) {
        std::ostringstream msg;
        msg << "config has " << violations.size() << " violation(s):";
        for (const auto& v : violations) msg << "\n  - " << v;
        throw ConfigError(msg.str(), violations);
    }
    return config;
}

void PipelineConfig::force_mock(std::uint64_t seed) {
    chat_backend.kind = gateway::BackendKind::Mock;
    chat_backend.mock_behavior = "pipeline";
    chat_backend.mock_seed = seed;
    embed_backend.kind = gateway::BackendKind::Mock;
    embed_backend.mock_behavior = "echo";
    embed_backend.mock_seed = seed;
    perspective.kind = "mock";
    perspective.mock_seed = seed;
}

void PipelineConfig::override_seed(std::uint64_t seed) {
    eval.seed = seed;
    split.seed = seed;
    chat_backend.mock_seed = seed;
    embed_backend.mock_seed = seed;
    perspective.mock_seed = seed;
}

std::string PipelineConfig::digest() const {
    nlohmann::json j{
        {"chat", {{"kind", static_cast<int>(chat_backend.kind)},
                  {"endpoint", chat_backend.endpoint},
                  {"model", chat_backend.model},
                  {"behavior", chat_backend.mock_behavior},
                  {"seed", chat_backend.mock_seed}}},
        {"embed", {{"kind", static_cast<int>(embed_backend.kind)},
                   {"endpoint", embed_backend.endpoint},
                   {"model", embed_backend.model},
                   {"dimension", embed_backend.mock_dimension},
                   {"seed", embed_backend.mock_seed}}},
        {"perspective", {{"kind", perspective.kind}, {"seed", perspective.mock_seed}}},
        {"corpus", {{"comments", corpus.comments_path.string()},
                    {"neutral", corpus.neutral_path.string()}}},
        {"n_values", n_values},
        {"consistency", consistency.default_variant},
        {"offensiveness", offensiveness.default_variant},
        {"eval", {{"sample_size", eval.sample_size},
                  {"seed", eval.seed},
                  {"criteria", eval.criteria},
                  {"ranks", eval.rank_analysis},
                  {"perspective", eval.perspective}}},
        {"split", {{"train", split.train}, {"val", split.val}, {"test", split.test},
                   {"seed", split.seed}, {"rounding", static_cast<int>(split.rounding)}}},
        {"assemble", assemble_policy},
        {"language", language},
    };
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(util::fnv1a64(j.dump())));
    return buf;
}

}  // namespace toxpair::pipeline
