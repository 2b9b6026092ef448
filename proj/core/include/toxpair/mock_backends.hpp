#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "toxpair/gateway.hpp"

namespace toxpair::gateway {

enum class MockFailure { RateLimited, Transient, Auth, Malformed };

// Deterministic chat backend. The stock behaviors are pure functions of the
// request, so repeated calls with the same request return the same text.
class MockChatBackend : public ChatBackend {
public:
    using Handler = std::function<std::string(const ChatRequest&)>;

    explicit MockChatBackend(Handler handler, std::string fingerprint = "mock-chat:custom");

    // Returns request.user_text unchanged.
    static std::shared_ptr<MockChatBackend> echo();

    // Dispatches on the request tag to play every pipeline role offline:
    // generation, both judge stages, G-Eval scoring and rank voting.
    static std::shared_ptr<MockChatBackend> scripted_pipeline(std::uint64_t seed);

    std::string complete(const ChatRequest& request) override;
    std::string fingerprint() const override { return fingerprint_; }

    // Next `count` calls throw instead of answering.
    void fail_next(int count, MockFailure failure);

    int calls() const { return calls_.load(); }
    int max_in_flight() const { return max_in_flight_.load(); }

private:
    Handler handler_;
    std::string fingerprint_;
    std::atomic<int> calls_{0};
    std::atomic<int> in_flight_{0};
    std::atomic<int> max_in_flight_{0};
    std::mutex failures_mutex_;
    std::deque<MockFailure> pending_failures_;
};

// Hash-seeded embedding backend: the raw vector is a pure function of
// (text, seed), unnormalized so that gateway-side normalization is
// observable.
class MockEmbedBackend : public EmbedBackend {
public:
    MockEmbedBackend(int dimension, std::uint64_t seed);

    std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) override;
    std::string fingerprint() const override;

    void fail_next(int count, MockFailure failure);
    int calls() const { return calls_.load(); }

private:
    int dimension_;
    std::uint64_t seed_;
    std::atomic<int> calls_{0};
    std::mutex failures_mutex_;
    std::deque<MockFailure> pending_failures_;
};

[[noreturn]] void throw_mock_failure(MockFailure failure);

}  // namespace toxpair::gateway
