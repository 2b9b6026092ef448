#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "toxpair/errors.hpp"

namespace toxpair::gateway {

struct ChatRequest {
    std::string system_text;
    std::string user_text;
    double temperature = 1.0;
    int max_tokens = 1024;
    // Free-form provenance label; the scripted mock also dispatches on it.
    std::string tag;
};

struct EmbeddingVector {
    std::vector<float> values;  // unit length after gateway normalization
    double norm = 0.0;          // L2 norm of the raw backend output
};

enum class BackendKind { HttpChat, HttpEmbed, Mock };

struct RetryPolicy {
    int max_attempts = 3;
    int base_delay_ms = 250;
};

struct BackendConfig {
    BackendKind kind = BackendKind::Mock;
    std::string endpoint;
    std::string model;
    std::string auth_env;  // name of the env var holding the bearer token
    RetryPolicy retry;
    int concurrency = 4;

    // Mock knobs (ignored by http backends).
    std::string mock_behavior = "echo";  // "echo" | "pipeline"
    std::uint64_t mock_seed = 0;
    int mock_dimension = 64;

    void validate() const;  // throws std::invalid_argument on bad fields
};

class GatewayError : public Error {
public:
    using Error::Error;
};

// Non-retryable: 401/403 or missing credential.
class AuthError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

// Retryable family: network failures and 5xx.
class TransientFailure : public GatewayError {
public:
    using GatewayError::GatewayError;
};

// Retryable: 429.
class RateLimited : public TransientFailure {
public:
    using TransientFailure::TransientFailure;
};

class ExhaustedRetries : public GatewayError {
public:
    using GatewayError::GatewayError;
};

// Body not parseable per the backend wire format (also non-retryable 4xx).
class MalformedResponse : public GatewayError {
public:
    using GatewayError::GatewayError;
};

// Backend returned vectors of inconsistent dimension within one batch.
class DimensionMismatch : public GatewayError {
public:
    using GatewayError::GatewayError;
};

// One-shot backend interfaces. Implementations throw the error family above;
// retry/backoff and normalization live in the Gateway wrapper.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string complete(const ChatRequest& request) = 0;
    virtual std::string fingerprint() const = 0;
};

class EmbedBackend {
public:
    virtual ~EmbedBackend() = default;
    // Raw vectors, not necessarily normalized; one per input text, in order.
    virtual std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) = 0;
    virtual std::string fingerprint() const = 0;
};

using SleepFn = std::function<void(std::chrono::milliseconds)>;

// Blocking in-flight limiter (std::counting_semaphore needs a compile-time
// ceiling, so a mutex/condvar pair is used instead).
class InflightLimiter {
public:
    explicit InflightLimiter(int limit);

    void acquire();
    void release();

    class Guard {
    public:
        explicit Guard(InflightLimiter& limiter) : limiter_(limiter) { limiter_.acquire(); }
        ~Guard() { limiter_.release(); }
        Guard(const Guard&) = delete;
        Guard& operator=(const Guard&) = delete;

    private:
        InflightLimiter& limiter_;
    };

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int available_;
};

// Uniform access to one chat and one embedding backend. Shareable across
// threads; each backend enforces its configured in-flight limit. Calls block.
class Gateway {
public:
    // Builds concrete backends from the configs (http or mock).
    Gateway(BackendConfig chat_config, BackendConfig embed_config, SleepFn sleep = {});

    // Injection constructor for tests and custom backends.
    Gateway(std::shared_ptr<ChatBackend> chat, BackendConfig chat_config,
            std::shared_ptr<EmbedBackend> embed, BackendConfig embed_config,
            SleepFn sleep = {});

    // Returns backend text verbatim apart from trailing whitespace. Retries
    // transient failures with delay = base_delay_ms * 2^attempt, up to
    // max_attempts total attempts, then throws ExhaustedRetries.
    std::string chat(const ChatRequest& request);

    // Order-preserving; every returned vector is L2-normalized here,
    // whatever the backend emitted.
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts);

    std::string chat_fingerprint() const;
    std::string embed_fingerprint() const;

    int chat_concurrency() const { return chat_config_.concurrency; }

private:
    std::shared_ptr<ChatBackend> chat_;
    std::shared_ptr<EmbedBackend> embed_;
    BackendConfig chat_config_;
    BackendConfig embed_config_;
    SleepFn sleep_;
    std::unique_ptr<InflightLimiter> chat_limiter_;
    std::unique_ptr<InflightLimiter> embed_limiter_;

    template <typename Fn>
    auto with_retries(const RetryPolicy& policy, Fn&& fn) -> decltype(fn());
};

// Normalizes in double precision; throws MalformedResponse on a zero vector.
EmbeddingVector normalize(const std::vector<float>& raw);

std::shared_ptr<ChatBackend> make_chat_backend(const BackendConfig& config);
std::shared_ptr<EmbedBackend> make_embed_backend(const BackendConfig& config);

}  // namespace toxpair::gateway
