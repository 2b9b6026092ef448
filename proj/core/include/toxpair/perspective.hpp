#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "toxpair/http_backend.hpp"

namespace toxpair::eval {

// Toxicity probability in [0,1] per text; throws on per-text failure.
class PerspectiveClient {
public:
    virtual ~PerspectiveClient() = default;
    virtual double score(const std::string& text) = 0;
};

class MockPerspectiveClient : public PerspectiveClient {
public:
    explicit MockPerspectiveClient(std::uint64_t seed = 0) : seed_(seed) {}
    // Fixed-probability variant for tests.
    explicit MockPerspectiveClient(double fixed) : fixed_(fixed), has_fixed_(true) {}

    double score(const std::string& text) override;

private:
    std::uint64_t seed_ = 0;
    double fixed_ = 0.0;
    bool has_fixed_ = false;
};

// Comment Analyzer wire format: POST {comment:{text}, requestedAttributes:
// {TOXICITY:{}}} -> attributeScores.TOXICITY.summaryScore.value.
class HttpPerspectiveClient : public PerspectiveClient {
public:
    HttpPerspectiveClient(std::string endpoint, std::string api_key_env,
                          gateway::HttpTransport transport = {});

    double score(const std::string& text) override;

private:
    std::string endpoint_;
    std::string api_key_env_;
    gateway::HttpTransport transport_;
};

struct PerspectiveRecord {
    std::size_t index = 0;
    double probability = 0.0;  // raw API value, the source of truth
    double display = 0.0;      // 1 + 4p, a display convention only
};

struct PerspectiveResult {
    std::vector<PerspectiveRecord> scored;
    std::vector<std::size_t> failed;  // per-text errors, text skipped
};

PerspectiveResult perspective_score(std::span<const std::string> texts,
                                    PerspectiveClient& client);

}  // namespace toxpair::eval
