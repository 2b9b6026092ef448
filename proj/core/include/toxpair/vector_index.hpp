#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "toxpair/corpus.hpp"
#include "toxpair/errors.hpp"
#include "toxpair/gateway.hpp"

namespace toxpair::retrieval {

struct RetrievalHit {
    std::uint64_t sentence_id = 0;
    double score = 0.0;  // cosine similarity; dot product of unit vectors
    int rank = 0;        // 1-based
};

class EmptyCorpus : public Error {
public:
    using Error::Error;
};

class FingerprintMismatch : public Error {
public:
    using Error::Error;
};

class VersionMismatch : public Error {
public:
    using Error::Error;
};

// Flat (exhaustive) index over unit vectors. Immutable after build;
// concurrent queries are safe.
class VectorIndex {
public:
    VectorIndex() = default;

    // One entry per sentence, input order preserved. The embed backend
    // fingerprint is recorded so mismatched queries are rejected. Throws
    // EmptyCorpus, or Error on duplicate sentence ids.
    static VectorIndex build(const std::vector<corpus::CleanSentence>& sentences,
                             gateway::Gateway& gateway);

    // Assembles an index from pre-normalized vectors (tests, tools).
    static VectorIndex from_entries(int dimension, std::vector<std::uint64_t> ids,
                                    std::vector<float> row_major_unit_vectors,
                                    std::string fingerprint);

    // Top-k by cosine similarity, ties broken by ascending sentence id.
    // Returns min(k, size()) hits. Throws FingerprintMismatch if the
    // gateway's embed backend differs from the one the index was built with.
    std::vector<RetrievalHit> query(const std::string& text, int k,
                                    gateway::Gateway& gateway) const;

    // Same ranking rule for a caller-supplied unit vector.
    std::vector<RetrievalHit> query_vector(std::span<const float> unit_vector, int k) const;

    void save(const std::filesystem::path& path) const;
    static VectorIndex load(const std::filesystem::path& path);

    int dimension() const { return dimension_; }
    std::size_t size() const { return ids_.size(); }
    const std::string& fingerprint() const { return fingerprint_; }
    std::uint64_t id_at(std::size_t i) const { return ids_[i]; }
    std::span<const float> vector_at(std::size_t i) const;

private:
    int dimension_ = 0;
    std::vector<std::uint64_t> ids_;
    std::vector<float> data_;  // row-major, one unit vector per id
    std::string fingerprint_;
};

}  // namespace toxpair::retrieval
