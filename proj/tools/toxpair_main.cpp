#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "toxpair/agreement.hpp"
#include "toxpair/dataset_io.hpp"
#include "toxpair/evaluator.hpp"
#include "toxpair/filterbank.hpp"
#include "toxpair/generator.hpp"
#include "toxpair/pipeline.hpp"
#include "toxpair/util.hpp"
#include "toxpair/vector_index.hpp"

namespace {

using namespace toxpair;
using nlohmann::json;

struct CommonOptions {
    std::string config_path;
    bool mock = false;
    std::optional<std::uint64_t> seed;
};

pipeline::PipelineConfig load_config(const CommonOptions& options) {
    auto config = pipeline::PipelineConfig::validate(options.config_path);
    if (options.mock) config.force_mock(options.seed.value_or(config.eval.seed));
    if (options.seed) config.override_seed(*options.seed);
    return config;
}

gateway::Gateway make_gateway(const pipeline::PipelineConfig& config) {
    return gateway::Gateway(config.chat_backend, config.embed_backend);
}

std::vector<std::string> read_label_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in.is_open()) throw IoError("cannot open " + path);
    std::vector<std::string> labels;
    std::string line;
    while (std::getline(in, line)) {
        std::string trimmed = util::trim(line);
        if (!trimmed.empty()) labels.push_back(trimmed);
    }
    return labels;
}

std::vector<std::vector<std::string>> read_label_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in.is_open()) throw IoError("cannot open " + path);
    std::vector<std::vector<std::string>> matrix;
    std::string line;
    while (std::getline(in, line)) {
        if (util::trim_view(line).empty()) continue;
        std::vector<std::string> row;
        std::string cell;
        std::istringstream cells(line);
        while (std::getline(cells, cell, ',')) row.push_back(util::trim(cell));
        matrix.push_back(std::move(row));
    }
    return matrix;
}

int run_pipeline_stages(const CommonOptions& common, const std::string& stages_csv) {
    pipeline::RunOptions options;
    options.force_mock = common.mock;
    options.seed_override = common.seed;
    if (!stages_csv.empty()) {
        std::istringstream in(stages_csv);
        std::string name;
        while (std::getline(in, name, ',')) {
            options.stages.insert(pipeline::stage_from_string(util::trim(name)));
        }
    }
    auto config = pipeline::PipelineConfig::validate(common.config_path);
    auto summary = pipeline::run(std::move(config), options, std::cerr);
    return summary.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"neutral->toxic paired dataset pipeline"};
    app.require_subcommand(1);

    CommonOptions common;

    auto add_common = [&common](CLI::App* cmd, bool config_required = true) {
        auto* opt = cmd->add_option("--config", common.config_path, "pipeline config JSON");
        if (config_required) opt->required();
        cmd->add_flag("--mock", common.mock, "force mock backends");
        cmd->add_option("--seed", common.seed, "override artifact-shaping seeds");
    };

    // --- run / single pipeline stages -------------------------------------
    std::string stages_csv;
    auto* run_cmd = app.add_subcommand("run", "run the pipeline end to end");
    add_common(run_cmd);
    run_cmd->add_option("--stages", stages_csv, "comma-separated stage subset");

    auto* ingest_cmd = app.add_subcommand("ingest", "clean the raw comment/neutral corpora");
    add_common(ingest_cmd);

    auto* generate_cmd = app.add_subcommand("generate", "produce the n-fanout candidates");
    add_common(generate_cmd);

    // --- index -------------------------------------------------------------
    auto* index_cmd = app.add_subcommand("index", "vector index operations");
    index_cmd->require_subcommand(1);

    std::string index_corpus, index_out;
    auto* index_build = index_cmd->add_subcommand("build", "embed a corpus into a flat index");
    add_common(index_build);
    index_build->add_option("--corpus", index_corpus, "clean sentences JSONL")->required();
    index_build->add_option("--out", index_out, "output index file")->required();

    std::string query_index, query_text;
    int query_k = 5;
    auto* index_query = index_cmd->add_subcommand("query", "top-k cosine retrieval");
    add_common(index_query);
    index_query->add_option("--index", query_index, "index file")->required();
    index_query->add_option("--text", query_text, "query text")->required();
    index_query->add_option("--k", query_k, "hit count");

    // --- filter ------------------------------------------------------------
    auto* filter_cmd = app.add_subcommand("filter", "LLM-judge filtering");
    filter_cmd->require_subcommand(1);

    std::string filter_stage = "consistency", filter_variant, filter_candidates, filter_out_dir;
    auto* filter_run = filter_cmd->add_subcommand("run", "run one filter stage");
    add_common(filter_run);
    filter_run->add_option("--stage", filter_stage, "consistency|offensiveness")->required();
    filter_run->add_option("--variant", filter_variant, "variant name or 'intersection'")
        ->required();
    filter_run->add_option("--candidates", filter_candidates, "candidates JSONL")->required();
    filter_run->add_option("--out-dir", filter_out_dir, "where verdicts/report/survivors go")
        ->required();

    // --- eval ----------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "scoring and agreement statistics");
    eval_cmd->require_subcommand(1);

    std::string geval_pairs, geval_criterion = "overall_offensiveness", geval_out;
    std::size_t geval_sample = 500;
    auto* eval_geval = eval_cmd->add_subcommand("geval", "1-5 rubric scoring over sampled pairs");
    add_common(eval_geval);
    eval_geval->add_option("--pairs", geval_pairs, "pairs JSONL")->required();
    eval_geval->add_option("--criterion", geval_criterion, "criterion name");
    eval_geval->add_option("--sample-size", geval_sample, "pairs to sample");
    eval_geval->add_option("--out", geval_out, "scores JSONL (optional)");

    std::string ranks_candidates;
    auto* eval_ranks = eval_cmd->add_subcommand("ranks", "judge-ranked n-fanout histogram");
    add_common(eval_ranks);
    eval_ranks->add_option("--candidates", ranks_candidates, "candidates JSONL")->required();

    std::string agree_a, agree_b, agree_matrix, agree_reference;
    auto* eval_agree = eval_cmd->add_subcommand("agreement", "agreement statistics over labels");
    eval_agree->add_option("--a", agree_a, "labels, one per line");
    eval_agree->add_option("--b", agree_b, "labels, one per line");
    eval_agree->add_option("--matrix", agree_matrix, "items x raters CSV of labels");
    eval_agree->add_option("--reference", agree_reference, "reference labels for majority vote");

    // --- dataset -------------------------------------------------------------
    auto* dataset_cmd = app.add_subcommand("dataset", "assemble/split/export the paired dataset");
    dataset_cmd->require_subcommand(1);

    std::string asm_survivors, asm_policy = "keep_all", asm_out, asm_language = "ko";
    std::vector<std::string> asm_verdicts;
    auto* dataset_assemble = dataset_cmd->add_subcommand("assemble", "survivors -> paired samples");
    dataset_assemble->add_option("--survivors", asm_survivors, "surviving candidates JSONL")
        ->required();
    dataset_assemble->add_option("--verdicts", asm_verdicts, "verdict JSONL (repeatable)");
    dataset_assemble->add_option("--policy", asm_policy, "keep_all|best_one");
    dataset_assemble->add_option("--language", asm_language, "language tag");
    dataset_assemble->add_option("--out", asm_out, "pairs JSONL")->required();

    std::string split_pairs, split_out_dir, split_rounding = "tidy-holdout";
    double split_train = 0.8, split_val = 0.1, split_test = 0.1;
    std::uint64_t split_seed = 0;
    auto* dataset_split = dataset_cmd->add_subcommand("split", "deterministic train/val/test cut");
    dataset_split->add_option("--pairs", split_pairs, "pairs JSONL")->required();
    dataset_split->add_option("--out-dir", split_out_dir, "output directory")->required();
    dataset_split->add_option("--train", split_train, "train ratio");
    dataset_split->add_option("--val", split_val, "val ratio");
    dataset_split->add_option("--test", split_test, "test ratio");
    dataset_split->add_option("--seed", split_seed, "shuffle seed");
    dataset_split->add_option("--rounding", split_rounding, "floor|tidy-holdout");

    std::string export_pairs, export_format = "pairs", export_out, export_instruction;
    auto* dataset_export = dataset_cmd->add_subcommand("export", "write an export format");
    dataset_export->add_option("--pairs", export_pairs, "pairs JSONL")->required();
    dataset_export->add_option("--format", export_format, "pairs|detox-instruct");
    dataset_export->add_option("--out", export_out, "output JSONL")->required();
    dataset_export->add_option("--instruction", export_instruction,
                               "instruction asset (detox-instruct)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) return run_pipeline_stages(common, stages_csv);
        if (*ingest_cmd) return run_pipeline_stages(common, "ingest");
        if (*generate_cmd) return run_pipeline_stages(common, "generate");

        if (*index_build) {
            auto config = load_config(common);
            auto gw = make_gateway(config);
            auto sentences = corpus::load_sentences(index_corpus);
            auto index = retrieval::VectorIndex::build(sentences, gw);
            index.save(index_out);
            std::cout << json{{"entries", index.size()},
                              {"dimension", index.dimension()},
                              {"fingerprint", index.fingerprint()}}
                             .dump()
                      << '\n';
            return 0;
        }
        if (*index_query) {
            auto config = load_config(common);
            auto gw = make_gateway(config);
            auto index = retrieval::VectorIndex::load(query_index);
            auto hits = index.query(query_text, query_k, gw);
            json out = json::array();
            for (const auto& h : hits) {
                out.push_back({{"rank", h.rank}, {"sentence_id", h.sentence_id},
                               {"score", h.score}});
            }
            std::cout << out.dump(2) << '\n';
            return 0;
        }

        if (*filter_run) {
            auto config = load_config(common);
            auto gw = make_gateway(config);
            auto candidates = gen::load_candidates(filter_candidates);
            filters::StageResult result;
            if (filter_variant == "intersection") {
                auto a = filters::FilterVariant::load(config.prompts.filters_dir /
                                                      "context-shift.txt");
                auto b = filters::FilterVariant::load(config.prompts.filters_dir /
                                                      "qa-and-paraphrasing.txt");
                result = filters::run_intersection(candidates, a, b, gw);
            } else {
                auto variant = filters::FilterVariant::load(config.prompts.filters_dir /
                                                            (filter_variant + ".txt"));
                if (filters::to_string(variant.stage) != filter_stage) {
                    throw Error("variant '" + filter_variant + "' belongs to stage " +
                                filters::to_string(variant.stage));
                }
                result = filters::run_stage(candidates, variant, gw);
            }
            std::filesystem::path dir(filter_out_dir);
            filters::save_verdicts(dir / (filter_stage + "_verdicts.jsonl"), result.verdicts);
            filters::save_report(dir / (filter_stage + "_report.json"), result.report);
            gen::save_candidates(dir / (filter_stage + "_survivors.jsonl"), result.survivors);
            std::cout << json{{"total_in", result.report.total_in},
                              {"retained", result.report.retained},
                              {"rejected", result.report.rejected},
                              {"unparseable", result.report.unparseable},
                              {"rate", result.report.rate}}
                             .dump()
                      << '\n';
            return 0;
        }

        if (*eval_geval) {
            auto config = load_config(common);
            auto gw = make_gateway(config);
            auto pairs = dataset::import_pairs_jsonl(geval_pairs);
            auto criterion = eval::Criterion::load(
                geval_criterion, config.prompts.geval_dir / (geval_criterion + ".txt"));
            std::size_t sample = std::min(geval_sample, pairs.size());
            auto result = eval::g_eval(pairs, criterion, gw, sample, config.eval.seed);
            if (!geval_out.empty()) eval::save_scores(geval_out, result.records);
            std::cout << json{{"criterion", geval_criterion},
                              {"n", result.report.n},
                              {"mean", result.report.mean},
                              {"stderr", result.report.std_error},
                              {"dropped", result.dropped}}
                             .dump()
                      << '\n';
            return 0;
        }
        if (*eval_ranks) {
            auto config = load_config(common);
            auto gw = make_gateway(config);
            auto candidates = gen::load_candidates(ranks_candidates);
            std::map<std::uint64_t, std::vector<gen::GenerationCandidate>> by_neutral;
            for (auto& c : candidates) by_neutral[c.neutral_id].push_back(std::move(c));
            std::vector<std::vector<gen::GenerationCandidate>> groups;
            for (auto& [id, group] : by_neutral) {
                std::sort(group.begin(), group.end(),
                          [](const auto& a, const auto& b) { return a.n < b.n; });
                if (group.size() == config.n_values.size()) groups.push_back(std::move(group));
            }
            auto hist = eval::rank_retrievals(groups, gw);
            json rows = json::object();
            for (const auto& [n, counts] : hist.counts) rows[std::to_string(n)] = counts;
            std::cout << json{{"groups_ranked", hist.groups_ranked},
                              {"groups_skipped", hist.groups_skipped},
                              {"rank_counts", rows}}
                             .dump(2)
                      << '\n';
            return 0;
        }
        if (*eval_agree) {
            json out;
            if (!agree_a.empty() && !agree_b.empty()) {
                auto a = read_label_lines(agree_a);
                auto b = read_label_lines(agree_b);
                out["percent_agreement"] = eval::percent_agreement(a, b);
                out["cohen_kappa"] = eval::cohen_kappa(a, b);
            }
            if (!agree_matrix.empty()) {
                auto matrix = read_label_matrix(agree_matrix);
                out["fleiss_kappa"] = eval::fleiss_kappa(matrix);
                if (!agree_reference.empty()) {
                    auto reference = read_label_lines(agree_reference);
                    out["majority_agreement"] = eval::majority_agreement(matrix, reference);
                }
            }
            if (out.empty()) {
                std::cerr << "nothing to compute; pass --a/--b and/or --matrix\n";
                return 2;
            }
            std::cout << out.dump(2) << '\n';
            return 0;
        }

        if (*dataset_assemble) {
            auto survivors = gen::load_candidates(asm_survivors);
            std::map<std::pair<std::uint64_t, int>, std::vector<std::string>> refs;
            for (const auto& path : asm_verdicts) {
                for (const auto& v : filters::load_verdicts(path)) {
                    if (v.pass) {
                        refs[{v.neutral_id, v.candidate_n}].push_back(
                            filters::to_string(v.stage) + ":" + v.variant + ":" + v.label);
                    }
                }
            }
            std::vector<dataset::SurvivorRecord> records;
            for (auto& c : survivors) {
                dataset::SurvivorRecord record;
                record.verdict_refs = refs[{c.neutral_id, c.n}];
                record.candidate = std::move(c);
                records.push_back(std::move(record));
            }
            auto policy = asm_policy == "best_one" ? dataset::AssemblePolicy::BestOne
                                                   : dataset::AssemblePolicy::KeepAll;
            auto pairs = dataset::assemble(records, policy, asm_language);
            dataset::export_samples(pairs, asm_out, dataset::ExportFormat::PairsJsonl);
            std::cout << json{{"pairs", pairs.size()}}.dump() << '\n';
            return 0;
        }
        if (*dataset_split) {
            auto pairs = dataset::import_pairs_jsonl(split_pairs);
            dataset::SplitSpec spec;
            spec.train = split_train;
            spec.val = split_val;
            spec.test = split_test;
            spec.seed = split_seed;
            spec.rounding = split_rounding == "floor" ? dataset::SplitSpec::Rounding::Floor
                                                      : dataset::SplitSpec::Rounding::TidyHoldout;
            auto result = dataset::split(pairs, spec);
            std::filesystem::path dir(split_out_dir);
            dataset::export_samples(result.train, dir / "train.jsonl",
                                    dataset::ExportFormat::PairsJsonl);
            dataset::export_samples(result.val, dir / "val.jsonl",
                                    dataset::ExportFormat::PairsJsonl);
            dataset::export_samples(result.test, dir / "test.jsonl",
                                    dataset::ExportFormat::PairsJsonl);
            std::cout << json{{"train", result.train.size()},
                              {"val", result.val.size()},
                              {"test", result.test.size()}}
                             .dump()
                      << '\n';
            return 0;
        }
        if (*dataset_export) {
            auto pairs = dataset::import_pairs_jsonl(export_pairs);
            if (export_format == "detox-instruct") {
                if (export_instruction.empty()) {
                    throw Error("--instruction is required for detox-instruct exports");
                }
                std::ifstream in(export_instruction);
                if (!in.is_open()) throw IoError("cannot open " + export_instruction);
                std::ostringstream buffer;
                buffer << in.rdbuf();
                dataset::export_samples(pairs, export_out,
                                        dataset::ExportFormat::DetoxInstructJsonl,
                                        util::trim(buffer.str()));
            } else {
                dataset::export_samples(pairs, export_out, dataset::ExportFormat::PairsJsonl);
            }
            std::cout << json{{"exported", pairs.size()}}.dump() << '\n';
            return 0;
        }
    } catch (const pipeline::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
