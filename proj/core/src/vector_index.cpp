#include "toxpair/vector_index.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <unordered_set>

namespace toxpair::retrieval {

namespace {

constexpr char kMagic[4] = {'T', 'P', 'I', 'X'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_raw(std::ofstream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
void read_raw(std::ifstream& in, T& value, const std::filesystem::path& path) {
    in.read(reinterpret_cast<char*>(&value), sizeof value);
    if (!in) throw IoError("truncated index file: " + path.string());
}

}  // namespace

VectorIndex VectorIndex::build(const std::vector<corpus::CleanSentence>& sentences,
                               gateway::Gateway& gateway) {
    if (sentences.empty()) {
        throw EmptyCorpus("cannot build an index over zero sentences");
    }
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(sentences.size());
    for (const auto& s : sentences) {
        if (!seen.insert(s.id).second) {
            throw Error("duplicate sentence id " + std::to_string(s.id));
        }
    }

    std::vector<std::string> texts;
    texts.reserve(sentences.size());
    for (const auto& s : sentences) texts.push_back(s.text);

    auto vectors = gateway.embed(texts);
    VectorIndex index;
    index.dimension_ = static_cast<int>(vectors.front().values.size());
    index.fingerprint_ = gateway.embed_fingerprint();
    index.ids_.reserve(sentences.size());
    index.data_.reserve(sentences.size() * static_cast<std::size_t>(index.dimension_));
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        index.ids_.push_back(sentences[i].id);
        const auto& values = vectors[i].values;
        index.data_.insert(index.data_.end(), values.begin(), values.end());
    }
    return index;
}

VectorIndex VectorIndex::from_entries(int dimension, std::vector<std::uint64_t> ids,
                                      std::vector<float> row_major_unit_vectors,
                                      std::string fingerprint) {
    if (dimension <= 0 || ids.empty() ||
        row_major_unit_vectors.size() != ids.size() * static_cast<std::size_t>(dimension)) {
        throw Error("inconsistent index entries");
    }
    VectorIndex index;
    index.dimension_ = dimension;
    index.ids_ = std::move(ids);
    index.data_ = std::move(row_major_unit_vectors);
    index.fingerprint_ = std::move(fingerprint);
    return index;
}

std::span<const float> VectorIndex::vector_at(std::size_t i) const {
    return {data_.data() + i * static_cast<std::size_t>(dimension_),
            static_cast<std::size_t>(dimension_)};
}

std::vector<RetrievalHit> VectorIndex::query_vector(std::span<const float> unit_vector,
                                                    int k) const {
    if (k < 0) throw Error("k must be non-negative");
    if (unit_vector.size() != static_cast<std::size_t>(dimension_)) {
        throw Error("query vector dimension mismatch");
    }
    std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), ids_.size());
    if (take == 0) return {};

    std::vector<RetrievalHit> hits(ids_.size());
    for (std::size_t row = 0; row < ids_.size(); ++row) {
        const float* v = data_.data() + row * static_cast<std::size_t>(dimension_);
        double dot = 0.0;
        for (int d = 0; d < dimension_; ++d) {
            dot += static_cast<double>(v[d]) * static_cast<double>(unit_vector[d]);
        }
        hits[row] = {ids_[row], dot, 0};
    }
    auto better = [](const RetrievalHit& a, const RetrievalHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.sentence_id < b.sentence_id;
    };
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(take), hits.end(),
                      better);
    hits.resize(take);
    for (std::size_t i = 0; i < hits.size(); ++i) hits[i].rank = static_cast<int>(i) + 1;
    return hits;
}

std::vector<RetrievalHit> VectorIndex::query(const std::string& text, int k,
                                             gateway::Gateway& gateway) const {
    if (gateway.embed_fingerprint() != fingerprint_) {
        throw FingerprintMismatch("index built with '" + fingerprint_ + "' but gateway embeds '" +
                                  gateway.embed_fingerprint() + "'");
    }
    auto embedded = gateway.embed({text});
    return query_vector(embedded.front().values, k);
}

void VectorIndex::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out.is_open()) throw IoError("cannot write " + path.string());

    out.write(kMagic, sizeof kMagic);
    write_raw(out, kVersion);
    write_raw(out, static_cast<std::uint32_t>(dimension_));
    write_raw(out, static_cast<std::uint64_t>(ids_.size()));
    write_raw(out, static_cast<std::uint32_t>(fingerprint_.size()));
    out.write(fingerprint_.data(), static_cast<std::streamsize>(fingerprint_.size()));
    out.write(reinterpret_cast<const char*>(ids_.data()),
              static_cast<std::streamsize>(ids_.size() * sizeof(std::uint64_t)));
    out.write(reinterpret_cast<const char*>(data_.data()),
              static_cast<std::streamsize>(data_.size() * sizeof(float)));
    if (!out) throw IoError("write failed on " + path.string());
}

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.is_open()) throw IoError("cannot open " + path.string());

    char magic[4];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
        throw VersionMismatch("not an index file: " + path.string());
    }
    std::uint32_t version = 0;
    read_raw(in, version, path);
    if (version != kVersion) {
        throw VersionMismatch("unsupported index version " + std::to_string(version));
    }
    std::uint32_t dimension = 0;
    std::uint64_t count = 0;
    std::uint32_t fp_len = 0;
    read_raw(in, dimension, path);
    read_raw(in, count, path);
    read_raw(in, fp_len, path);

    VectorIndex index;
    index.dimension_ = static_cast<int>(dimension);
    index.fingerprint_.resize(fp_len);
    in.read(index.fingerprint_.data(), fp_len);
    if (!in) throw IoError("truncated index file: " + path.string());

    index.ids_.resize(count);
    in.read(reinterpret_cast<char*>(index.ids_.data()),
            static_cast<std::streamsize>(count * sizeof(std::uint64_t)));
    if (!in) throw IoError("truncated index file: " + path.string());

    index.data_.resize(count * dimension);
    in.read(reinterpret_cast<char*>(index.data_.data()),
            static_cast<std::streamsize>(index.data_.size() * sizeof(float)));
    if (!in) throw IoError("truncated index file: " + path.string());

    // Anything left over means the header lied about the payload size.
    char extra;
    if (in.read(&extra, 1)) {
        throw VersionMismatch("trailing bytes after index payload: " + path.string());
    }
    return index;
}

}  // namespace toxpair::retrieval
