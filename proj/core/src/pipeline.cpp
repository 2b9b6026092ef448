#include "toxpair/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

#include "toxpair/evaluator.hpp"
#include "toxpair/filterbank.hpp"
#include "toxpair/generator.hpp"
#include "toxpair/jsonl.hpp"
#include "toxpair/perspective.hpp"
#include "toxpair/prompt_template.hpp"
#include "toxpair/util.hpp"
#include "toxpair/vector_index.hpp"

namespace toxpair::pipeline {

std::string to_string(StageName stage) {
    switch (stage) {
        case StageName::Ingest: return "ingest";
        case StageName::Index: return "index";
        case StageName::Generate: return "generate";
        case StageName::Filter: return "filter";
        case StageName::Eval: return "eval";
        case StageName::Dataset: return "dataset";
    }
    return "?";
}

StageName stage_from_string(const std::string& name) {
    static const std::map<std::string, StageName> table{
        {"ingest", StageName::Ingest},   {"index", StageName::Index},
        {"generate", StageName::Generate}, {"filter", StageName::Filter},
        {"eval", StageName::Eval},       {"dataset", StageName::Dataset}};
    auto it = table.find(name);
    if (it == table.end()) throw Error("unknown stage: " + name);
    return it->second;
}

namespace {

using nlohmann::json;

struct Paths {
    std::filesystem::path root;

    std::filesystem::path comments() const { return root / "corpus" / "comments.jsonl"; }
    std::filesystem::path comments_stats() const { return root / "corpus" / "comments_stats.json"; }
    std::filesystem::path neutral() const { return root / "corpus" / "neutral.jsonl"; }
    std::filesystem::path neutral_stats() const { return root / "corpus" / "neutral_stats.json"; }
    std::filesystem::path index() const { return root / "index" / "comments.idx"; }
    std::filesystem::path candidates() const { return root / "generate" / "candidates.jsonl"; }
    std::filesystem::path checkpoint() const { return root / "generate" / "checkpoint.jsonl"; }
    std::filesystem::path verdicts(const std::string& stage) const {
        return root / "filter" / (stage + "_verdicts.jsonl");
    }
    std::filesystem::path retention(const std::string& stage) const {
        return root / "filter" / (stage + "_report.json");
    }
    std::filesystem::path survivors() const { return root / "filter" / "survivors.jsonl"; }
    std::filesystem::path scores(const std::string& criterion) const {
        return root / "eval" / ("scores_" + criterion + ".jsonl");
    }
    std::filesystem::path aggregates() const { return root / "eval" / "aggregates.json"; }
    std::filesystem::path ranks() const { return root / "eval" / "ranks.json"; }
    std::filesystem::path perspective() const { return root / "eval" / "perspective.json"; }
    std::filesystem::path pairs() const { return root / "dataset" / "pairs.jsonl"; }
    std::filesystem::path split_file(const std::string& name) const {
        return root / "dataset" / (name + ".jsonl");
    }
    std::filesystem::path instruct_file(const std::string& name) const {
        return root / "dataset" / (name + "_instruct.jsonl");
    }
    std::filesystem::path report() const { return root / "report.json"; }
    std::filesystem::path done_marker(const std::string& stage) const {
        return root / "checkpoints" / (stage + ".done");
    }
};

class Logger {
public:
    explicit Logger(std::ostream& out) : out_(out) {}

    void event(const std::string& kind, json fields = json::object()) {
        fields["event"] = kind;
        out_ << fields.dump() << '\n';
    }

private:
    std::ostream& out_;
};

bool stage_done(const Paths& paths, const std::string& stage, const std::string& digest) {
    auto marker = paths.done_marker(stage);
    if (!std::filesystem::exists(marker)) return false;
    std::ifstream in(marker);
    json j = json::parse(in, nullptr, false);
    return !j.is_discarded() && j.value("digest", "") == digest;
}

void mark_done(const Paths& paths, const std::string& stage, const std::string& digest) {
    auto marker = paths.done_marker(stage);
    std::filesystem::create_directories(marker.parent_path());
    std::ofstream out(marker);
    out << json{{"stage", stage}, {"digest", digest}}.dump() << '\n';
}

void require_artifact(const std::filesystem::path& path, const std::string& needed_by,
                      const std::string& produced_by) {
    if (!std::filesystem::exists(path)) {
        throw StageDependencyError("stage '" + needed_by + "' needs " + path.string() +
                                   "; run stage '" + produced_by + "' first");
    }
}

corpus::RecordFormat parse_format(const std::string& format) {
    return format == "csv" ? corpus::RecordFormat::Csv : corpus::RecordFormat::Jsonl;
}

void run_ingest(const PipelineConfig& config, const Paths& paths, Logger& log) {
    auto ingest_one = [&](const std::filesystem::path& in, const std::string& format,
                          const std::filesystem::path& out_sentences,
                          const std::filesystem::path& out_stats, const char* which) {
        auto loaded = corpus::load_records(in, parse_format(format));
        auto cleaned = corpus::clean(loaded.records);
        corpus::save_sentences(out_sentences, cleaned.kept);
        corpus::save_stats(out_stats, cleaned.stats);
        log.event("ingested", {{"which", which},
                               {"records", loaded.records.size()},
                               {"skipped_rows", loaded.skipped},
                               {"kept", cleaned.stats.total_kept}});
    };
    ingest_one(config.corpus.comments_path, config.corpus.comments_format, paths.comments(),
               paths.comments_stats(), "comments");
    ingest_one(config.corpus.neutral_path, config.corpus.neutral_format, paths.neutral(),
               paths.neutral_stats(), "neutral");
}

void run_index(const PipelineConfig& config, const Paths& paths, gateway::Gateway& gateway,
               Logger& log) {
    require_artifact(paths.comments(), "index", "ingest");
    auto comments = corpus::load_sentences(paths.comments());
    auto index = retrieval::VectorIndex::build(comments, gateway);
    index.save(paths.index());
    log.event("indexed", {{"entries", index.size()}, {"dimension", index.dimension()}});
    (void)config;
}

void run_generate(const PipelineConfig& config, const Paths& paths, gateway::Gateway& gateway,
                  Logger& log) {
    require_artifact(paths.index(), "generate", "index");
    require_artifact(paths.neutral(), "generate", "ingest");
    require_artifact(paths.comments(), "generate", "ingest");

    auto index = retrieval::VectorIndex::load(paths.index());
    auto neutrals = corpus::load_sentences(paths.neutral());
    auto comments = corpus::load_sentences(paths.comments());
    auto lookup = gen::make_comment_lookup(comments);
    auto tmpl = gen::PromptTemplate::load(config.prompts.generation);

    gen::GenerationOptions options;
    options.n_values = config.n_values;
    int max_n = *std::max_element(options.n_values.begin(), options.n_values.end());
    if (static_cast<std::size_t>(max_n) > index.size()) {
        throw Error("comment index holds " + std::to_string(index.size()) +
                    " entries, too few for n=" + std::to_string(max_n));
    }

    // Candidates are buffered and rewritten wholesale so the JSONL artifact
    // stays ordered even across resumed runs.
    std::vector<gen::GenerationCandidate> produced;
    if (std::filesystem::exists(paths.candidates())) {
        produced = gen::load_candidates(paths.candidates());
    }
    auto stats = gen::batch_generate(
        neutrals, index, gateway, tmpl, lookup, paths.checkpoint(),
        [&](const gen::GenerationCandidate& c) { produced.push_back(c); }, options);

    std::sort(produced.begin(), produced.end(), [](const auto& a, const auto& b) {
        if (a.neutral_id != b.neutral_id) return a.neutral_id < b.neutral_id;
        return a.n < b.n;
    });
    // A crash between the sink and the checkpoint append can re-produce one
    // neutral's fanout on resume; keep the first of any (neutral, n) pair.
    produced.erase(std::unique(produced.begin(), produced.end(),
                               [](const auto& a, const auto& b) {
                                   return a.neutral_id == b.neutral_id && a.n == b.n;
                               }),
                   produced.end());
    gen::save_candidates(paths.candidates(), produced);
    log.event("generated", {{"neutrals", stats.neutrals_processed},
                            {"resumed_past", stats.neutrals_skipped},
                            {"candidates", produced.size()},
                            {"failures", stats.failures.size()}});
}

filters::FilterVariant load_variant(const PipelineConfig& config, const std::string& name) {
    return filters::FilterVariant::load(config.prompts.filters_dir / (name + ".txt"));
}

filters::StageResult run_filter_stage(const PipelineConfig& config,
                                      const StageVariants& stage_config,
                                      std::span<const gen::GenerationCandidate> candidates,
                                      gateway::Gateway& gateway) {
    if (stage_config.default_variant == "intersection") {
        auto a = load_variant(config, "context-shift");
        auto b = load_variant(config, "qa-and-paraphrasing");
        return filters::run_intersection(candidates, a, b, gateway);
    }
    auto variant = load_variant(config, stage_config.default_variant);
    return filters::run_stage(candidates, variant, gateway);
}

void run_filter(const PipelineConfig& config, const Paths& paths, gateway::Gateway& gateway,
                Logger& log) {
    require_artifact(paths.candidates(), "filter", "generate");
    auto candidates = gen::load_candidates(paths.candidates());

    // Composition order: pair consistency first, then implicit offensiveness.
    auto consistency = run_filter_stage(config, config.consistency, candidates, gateway);
    filters::save_verdicts(paths.verdicts("consistency"), consistency.verdicts);
    filters::save_report(paths.retention("consistency"), consistency.report);
    log.event("filtered", {{"stage", "consistency"},
                           {"variant", consistency.report.variant},
                           {"retained", consistency.report.retained},
                           {"rate", consistency.report.rate}});

    auto offensiveness =
        run_filter_stage(config, config.offensiveness, consistency.survivors, gateway);
    filters::save_verdicts(paths.verdicts("offensiveness"), offensiveness.verdicts);
    filters::save_report(paths.retention("offensiveness"), offensiveness.report);
    log.event("filtered", {{"stage", "offensiveness"},
                           {"variant", offensiveness.report.variant},
                           {"retained", offensiveness.report.retained},
                           {"rate", offensiveness.report.rate}});

    gen::save_candidates(paths.survivors(), offensiveness.survivors);
}

std::vector<dataset::SurvivorRecord> survivor_records(const Paths& paths) {
    auto survivors = gen::load_candidates(paths.survivors());

    std::map<std::pair<std::uint64_t, int>, std::vector<std::string>> refs;
    for (const char* stage : {"consistency", "offensiveness"}) {
        auto path = paths.verdicts(stage);
        if (!std::filesystem::exists(path)) continue;
        for (const auto& v : filters::load_verdicts(path)) {
            if (v.pass) {
                refs[{v.neutral_id, v.candidate_n}].push_back(
                    filters::to_string(v.stage) + ":" + v.variant + ":" + v.label);
            }
        }
    }

    std::vector<dataset::SurvivorRecord> records;
    records.reserve(survivors.size());
    for (auto& c : survivors) {
        dataset::SurvivorRecord record;
        record.verdict_refs = refs[{c.neutral_id, c.n}];
        record.candidate = std::move(c);
        records.push_back(std::move(record));
    }
    return records;
}

dataset::AssemblePolicy parse_policy(const std::string& name) {
    return name == "best_one" ? dataset::AssemblePolicy::BestOne
                              : dataset::AssemblePolicy::KeepAll;
}

void run_eval(const PipelineConfig& config, const Paths& paths, gateway::Gateway& gateway,
              Logger& log) {
    require_artifact(paths.survivors(), "eval", "filter");
    auto records = survivor_records(paths);
    auto pairs = dataset::assemble(records, parse_policy(config.assemble_policy), config.language);
    if (pairs.empty()) {
        throw Error("no surviving pairs to evaluate");
    }

    std::vector<eval::AggregateReport> reports;
    std::size_t sample_size = std::min(config.eval.sample_size, pairs.size());
    if (sample_size < config.eval.sample_size) {
        log.event("eval_sample_clamped",
                  {{"requested", config.eval.sample_size}, {"available", pairs.size()}});
    }
    for (const auto& name : config.eval.criteria) {
        auto criterion = eval::Criterion::load(name, config.prompts.geval_dir / (name + ".txt"));
        auto result = eval::g_eval(pairs, criterion, gateway, sample_size, config.eval.seed);
        eval::save_scores(paths.scores(name), result.records);
        reports.push_back(result.report);
        log.event("geval", {{"criterion", name},
                            {"n", result.report.n},
                            {"mean", result.report.mean},
                            {"stderr", result.report.std_error},
                            {"dropped", result.dropped}});
    }
    eval::save_aggregates(paths.aggregates(), reports);

    if (config.eval.rank_analysis) {
        require_artifact(paths.candidates(), "eval", "generate");
        auto candidates = gen::load_candidates(paths.candidates());
        std::map<std::uint64_t, std::vector<gen::GenerationCandidate>> by_neutral;
        for (auto& c : candidates) by_neutral[c.neutral_id].push_back(std::move(c));
        std::vector<std::vector<gen::GenerationCandidate>> groups;
        std::size_t incomplete = 0;
        for (auto& [id, group] : by_neutral) {
            if (group.size() == config.n_values.size()) {
                std::sort(group.begin(), group.end(),
                          [](const auto& a, const auto& b) { return a.n < b.n; });
                groups.push_back(std::move(group));
            } else {
                ++incomplete;
            }
        }
        auto hist = eval::rank_retrievals(groups, gateway);
        json rows = json::object();
        for (const auto& [n, counts] : hist.counts) {
            rows[std::to_string(n)] = counts;
        }
        json out{{"groups_ranked", hist.groups_ranked},
                 {"groups_skipped", hist.groups_skipped},
                 {"incomplete_groups", incomplete},
                 {"rank_counts", rows}};
        std::filesystem::create_directories(paths.ranks().parent_path());
        std::ofstream file(paths.ranks());
        file << out.dump(2) << '\n';
        log.event("ranked", {{"groups", hist.groups_ranked}, {"skipped", hist.groups_skipped}});
    }

    if (config.eval.perspective) {
        std::vector<std::string> texts;
        texts.reserve(pairs.size());
        for (const auto& p : pairs) texts.push_back(p.toxic_text);
        std::unique_ptr<eval::PerspectiveClient> client;
        if (config.perspective.kind == "http") {
            client = std::make_unique<eval::HttpPerspectiveClient>(config.perspective.endpoint,
                                                                   config.perspective.api_key_env);
        } else {
            client = std::make_unique<eval::MockPerspectiveClient>(config.perspective.mock_seed);
        }
        auto result = eval::perspective_score(texts, *client);
        double mean_p = 0.0;
        json items = json::array();
        for (const auto& r : result.scored) {
            mean_p += r.probability;
            items.push_back({{"index", r.index},
                             {"probability", r.probability},
                             {"display_1_to_5", r.display}});
        }
        if (!result.scored.empty()) mean_p /= static_cast<double>(result.scored.size());
        json out{{"scored", result.scored.size()},
                 {"failed", result.failed.size()},
                 {"mean_probability", mean_p},
                 {"display_note", "display_1_to_5 = 1 + 4p; a display convention, not an API value"},
                 {"items", items}};
        std::filesystem::create_directories(paths.perspective().parent_path());
        std::ofstream file(paths.perspective());
        file << out.dump(2) << '\n';
        log.event("perspective", {{"scored", result.scored.size()}});
    }
}

void run_dataset(const PipelineConfig& config, const Paths& paths, Logger& log) {
    require_artifact(paths.survivors(), "dataset", "filter");
    auto records = survivor_records(paths);
    auto pairs = dataset::assemble(records, parse_policy(config.assemble_policy), config.language);
    dataset::export_samples(pairs, paths.pairs(), dataset::ExportFormat::PairsJsonl);

    std::ifstream instr(config.prompts.detox_instruction);
    std::ostringstream buffer;
    buffer << instr.rdbuf();
    std::string instruction = util::trim(buffer.str());

    if (pairs.size() >= 3) {
        auto splits = dataset::split(pairs, config.split);
        const std::pair<const char*, const std::vector<dataset::PairedSample>*> parts[] = {
            {"train", &splits.train}, {"val", &splits.val}, {"test", &splits.test}};
        for (const auto& [name, samples] : parts) {
            dataset::export_samples(*samples, paths.split_file(name),
                                    dataset::ExportFormat::PairsJsonl);
            dataset::export_samples(*samples, paths.instruct_file(name),
                                    dataset::ExportFormat::DetoxInstructJsonl, instruction);
        }
        log.event("dataset", {{"pairs", pairs.size()},
                              {"train", splits.train.size()},
                              {"val", splits.val.size()},
                              {"test", splits.test.size()}});
    } else {
        log.event("dataset", {{"pairs", pairs.size()}, {"split", "skipped, need >= 3 pairs"}});
    }
}

void write_report(const Paths& paths) {
    json report = json::object();

    json retention = json::array();
    for (const char* stage : {"consistency", "offensiveness"}) {
        auto path = paths.retention(stage);
        if (!std::filesystem::exists(path)) continue;
        std::ifstream in(path);
        json j = json::parse(in, nullptr, false);
        if (!j.is_discarded()) retention.push_back(j);
    }
    if (!retention.empty()) report["retention"] = retention;

    if (std::filesystem::exists(paths.aggregates())) {
        std::ifstream in(paths.aggregates());
        json j = json::parse(in, nullptr, false);
        if (!j.is_discarded()) report["geval"] = j;
    }
    if (std::filesystem::exists(paths.ranks())) {
        std::ifstream in(paths.ranks());
        json j = json::parse(in, nullptr, false);
        if (!j.is_discarded()) report["rank_analysis"] = j;
    }
    if (std::filesystem::exists(paths.perspective())) {
        std::ifstream in(paths.perspective());
        json j = json::parse(in, nullptr, false);
        if (!j.is_discarded()) {
            j.erase("items");
            report["perspective"] = j;
        }
    }
    for (const char* name : {"train", "val", "test"}) {
        auto path = paths.split_file(name);
        if (!std::filesystem::exists(path)) continue;
        std::ifstream in(path);
        std::size_t lines = 0;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty()) ++lines;
        }
        report["splits"][name] = lines;
    }

    std::ofstream out(paths.report());
    out << report.dump(2) << '\n';
}

}  // namespace

RunSummary run(PipelineConfig config, const RunOptions& options, std::ostream& log_stream) {
    if (options.force_mock) {
        config.force_mock(options.seed_override.value_or(config.eval.seed));
    }
    if (options.seed_override) {
        config.override_seed(*options.seed_override);
    }

    Logger log(log_stream);
    Paths paths{config.output_dir};
    std::filesystem::create_directories(paths.root);
    std::string digest = config.digest();

    std::optional<gateway::Gateway> gateway;
    auto lazy_gateway = [&]() -> gateway::Gateway& {
        if (!gateway) gateway.emplace(config.chat_backend, config.embed_backend);
        return *gateway;
    };

    const StageName order[] = {StageName::Ingest, StageName::Index, StageName::Generate,
                               StageName::Filter, StageName::Eval, StageName::Dataset};

    RunSummary summary;
    for (StageName stage : order) {
        if (!options.stages.empty() && !options.stages.count(stage)) continue;
        std::string name = to_string(stage);
        if (stage_done(paths, name, digest)) {
            log.event("stage_skipped", {{"stage", name}, {"reason", "checkpoint"}});
            summary.stages_skipped.push_back(name);
            continue;
        }
        log.event("stage_start", {{"stage", name}});
        try {
            switch (stage) {
                case StageName::Ingest: run_ingest(config, paths, log); break;
                case StageName::Index: run_index(config, paths, lazy_gateway(), log); break;
                case StageName::Generate: run_generate(config, paths, lazy_gateway(), log); break;
                case StageName::Filter: run_filter(config, paths, lazy_gateway(), log); break;
                case StageName::Eval: run_eval(config, paths, lazy_gateway(), log); break;
                case StageName::Dataset: run_dataset(config, paths, log); break;
            }
        } catch (const std::exception& e) {
            log.event("stage_failed", {{"stage", name}, {"error", e.what()}});
            summary.exit_code = 1;
            write_report(paths);
            return summary;
        }
        mark_done(paths, name, digest);
        summary.stages_run.push_back(name);
        log.event("stage_done", {{"stage", name}});
    }

    write_report(paths);
    return summary;
}

}  // namespace toxpair::pipeline
