#include "toxpair/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "toxpair/jsonl.hpp"
#include "toxpair/util.hpp"

namespace toxpair::dataset {

std::vector<PairedSample> assemble(std::span<const SurvivorRecord> survivors,
                                   AssemblePolicy policy, const std::string& language) {
    std::vector<const SurvivorRecord*> ordered;
    ordered.reserve(survivors.size());
    for (const auto& s : survivors) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(), [](const SurvivorRecord* a, const SurvivorRecord* b) {
        if (a->candidate.neutral_id != b->candidate.neutral_id) {
            return a->candidate.neutral_id < b->candidate.neutral_id;
        }
        return a->candidate.n < b->candidate.n;
    });

    std::vector<PairedSample> out;
    std::set<std::pair<std::string, std::string>> seen_pair;
    std::set<std::uint64_t> seen_neutral;
    for (const SurvivorRecord* s : ordered) {
        const auto& c = s->candidate;
        if (policy == AssemblePolicy::BestOne && !seen_neutral.insert(c.neutral_id).second) {
            continue;
        }
        if (!seen_pair.insert({c.neutral_text, c.toxic_text}).second) continue;

        PairedSample sample;
        sample.neutral_text = c.neutral_text;
        sample.toxic_text = c.toxic_text;
        sample.provenance = {c.neutral_id, c.n, c.retrieved_ids, s->verdict_refs};
        sample.language = language;
        out.push_back(std::move(sample));
    }
    return out;
}

void SplitSpec::validate() const {
    if (train <= 0.0 || val <= 0.0 || test <= 0.0) {
        throw std::invalid_argument("split ratios must be positive");
    }
    if (std::abs(train + val + test - 1.0) > 1e-9) {
        throw std::invalid_argument("split ratios must sum to 1");
    }
}

namespace {

// Rounds down to at most two significant digits: 755 -> 750, 1511 -> 1500.
std::size_t tidy_two_digits(std::size_t value) {
    if (value < 100) return value;
    std::size_t magnitude = 1;
    for (std::size_t v = value; v >= 100; v /= 10) magnitude *= 10;
    return value / magnitude * magnitude;
}

}  // namespace

SplitSizes split_sizes(std::size_t count, const SplitSpec& spec) {
    spec.validate();
    auto by_ratio = [&](double ratio) {
        return static_cast<std::size_t>(std::floor(static_cast<double>(count) * ratio + 1e-9));
    };
    std::size_t val = by_ratio(spec.val);
    std::size_t test = by_ratio(spec.test);
    if (spec.rounding == SplitSpec::Rounding::TidyHoldout) {
        val = tidy_two_digits(val);
        test = tidy_two_digits(test);
    }
    if (val + test > count) {
        throw std::invalid_argument("holdout sizes exceed the sample count");
    }
    return {count - val - test, val, test};
}

SplitResult split(std::vector<PairedSample> samples, const SplitSpec& spec) {
    spec.validate();
    if (samples.size() < 3) {
        throw std::invalid_argument("need at least 3 samples to split");
    }

    // Canonical order first: hash of the pair content, texts as tie-break.
    std::sort(samples.begin(), samples.end(), [](const PairedSample& a, const PairedSample& b) {
        std::uint64_t ha = util::fnv1a64(a.neutral_text + "\x1f" + a.toxic_text);
        std::uint64_t hb = util::fnv1a64(b.neutral_text + "\x1f" + b.toxic_text);
        if (ha != hb) return ha < hb;
        if (a.neutral_text != b.neutral_text) return a.neutral_text < b.neutral_text;
        return a.toxic_text < b.toxic_text;
    });
    util::deterministic_shuffle(samples, spec.seed);

    SplitSizes sizes = split_sizes(samples.size(), spec);
    SplitResult result;
    result.train.assign(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(sizes.train));
    result.val.assign(samples.begin() + static_cast<std::ptrdiff_t>(sizes.train),
                      samples.begin() + static_cast<std::ptrdiff_t>(sizes.train + sizes.val));
    result.test.assign(samples.begin() + static_cast<std::ptrdiff_t>(sizes.train + sizes.val),
                       samples.end());
    return result;
}

namespace {

nlohmann::json meta_json(const PairedSample& sample) {
    return {{"neutral_id", sample.provenance.neutral_id},
            {"n", sample.provenance.n},
            {"retrieved_ids", sample.provenance.retrieved_ids},
            {"verdicts", sample.provenance.verdict_refs},
            {"language", sample.language},
            {"license", "CC BY-NC 4.0"}};
}

}  // namespace

void export_samples(std::span<const PairedSample> samples, const std::filesystem::path& path,
                    ExportFormat format, const std::string& instruction_text) {
    if (format == ExportFormat::DetoxInstructJsonl && instruction_text.empty()) {
        throw std::invalid_argument("detox export needs the instruction text");
    }
    jsonl::Writer writer(path);
    for (const auto& s : samples) {
        if (format == ExportFormat::PairsJsonl) {
            writer.write({{"neutral", s.neutral_text}, {"toxic", s.toxic_text},
                          {"meta", meta_json(s)}});
        } else {
            // The detoxification direction: toxic in, neutral out.
            writer.write({{"instruction", instruction_text},
                          {"input", s.toxic_text},
                          {"output", s.neutral_text}});
        }
    }
}

std::vector<PairedSample> import_pairs_jsonl(const std::filesystem::path& path) {
    std::vector<PairedSample> out;
    jsonl::for_each_record(path, [&](std::size_t, const nlohmann::json& j) {
        PairedSample s;
        s.neutral_text = j.at("neutral").get<std::string>();
        s.toxic_text = j.at("toxic").get<std::string>();
        if (j.contains("meta")) {
            const auto& meta = j["meta"];
            s.provenance.neutral_id = meta.value("neutral_id", std::uint64_t{0});
            s.provenance.n = meta.value("n", 0);
            if (meta.contains("retrieved_ids")) {
                s.provenance.retrieved_ids =
                    meta["retrieved_ids"].get<std::vector<std::uint64_t>>();
            }
            if (meta.contains("verdicts")) {
                s.provenance.verdict_refs = meta["verdicts"].get<std::vector<std::string>>();
            }
            s.language = meta.value("language", "ko");
        }
        out.push_back(std::move(s));
    });
    return out;
}

}  // namespace toxpair::dataset
