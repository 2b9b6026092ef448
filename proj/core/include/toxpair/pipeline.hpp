#pragma once

#include <optional>
#include <ostream>
#include <set>
#include <string>

#include "toxpair/pipeline_config.hpp"

namespace toxpair::pipeline {

class StageDependencyError : public Error {
public:
    using Error::Error;
};

enum class StageName { Ingest, Index, Generate, Filter, Eval, Dataset };

std::string to_string(StageName stage);
StageName stage_from_string(const std::string& name);

struct RunOptions {
    // Empty means every stage, in pipeline order.
    std::set<StageName> stages;
    bool force_mock = false;
    std::optional<std::uint64_t> seed_override;
};

struct RunSummary {
    int exit_code = 0;
    std::vector<std::string> stages_run;
    std::vector<std::string> stages_skipped;
};

// Runs the selected stages sequentially: ingest -> index -> generate ->
// filter -> eval -> dataset. Completed stages are skipped on rerun via
// digest-stamped done markers; artifacts land under config.output_dir and
// are byte-stable for a fixed (config, seed). Structured one-object-per-line
// events go to `log`.
RunSummary run(PipelineConfig config, const RunOptions& options, std::ostream& log);

}  // namespace toxpair::pipeline
