#include "toxpair/gateway.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>

#include "toxpair/http_backend.hpp"
#include "toxpair/mock_backends.hpp"
#include "toxpair/util.hpp"

namespace toxpair::gateway {

void BackendConfig::validate() const {
    if (retry.max_attempts < 1) {
        throw std::invalid_argument("retry.max_attempts must be >= 1");
    }
    if (retry.base_delay_ms < 0) {
        throw std::invalid_argument("retry.base_delay_ms must be >= 0");
    }
    if (concurrency < 1) {
        throw std::invalid_argument("concurrency limit must be >= 1");
    }
    if (kind != BackendKind::Mock && endpoint.empty()) {
        throw std::invalid_argument("http backend requires an endpoint");
    }
    if (kind == BackendKind::Mock && mock_behavior != "echo" && mock_behavior != "pipeline") {
        throw std::invalid_argument("mock_behavior must be 'echo' or 'pipeline'");
    }
    if (kind == BackendKind::Mock && mock_dimension < 1) {
        throw std::invalid_argument("mock_dimension must be >= 1");
    }
}

InflightLimiter::InflightLimiter(int limit) : available_(limit) {}

void InflightLimiter::acquire() {
    std::unique_lock<std::mutex> lock(mutex_);
    cv_.wait(lock, [&] { return available_ > 0; });
    --available_;
}

void InflightLimiter::release() {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        ++available_;
    }
    cv_.notify_one();
}

std::shared_ptr<ChatBackend> make_chat_backend(const BackendConfig& config) {
    config.validate();
    switch (config.kind) {
        case BackendKind::Mock:
            if (config.mock_behavior == "pipeline") {
                return MockChatBackend::scripted_pipeline(config.mock_seed);
            }
            return MockChatBackend::echo();
        case BackendKind::HttpChat:
            return std::make_shared<HttpChatBackend>(config);
        case BackendKind::HttpEmbed:
            throw std::invalid_argument("http-embed backend cannot serve chat");
    }
    throw std::invalid_argument("unknown backend kind");
}

std::shared_ptr<EmbedBackend> make_embed_backend(const BackendConfig& config) {
    config.validate();
    switch (config.kind) {
        case BackendKind::Mock:
            return std::make_shared<MockEmbedBackend>(config.mock_dimension, config.mock_seed);
        case BackendKind::HttpEmbed:
            return std::make_shared<HttpEmbedBackend>(config);
        case BackendKind::HttpChat:
            throw std::invalid_argument("http-chat backend cannot serve embeddings");
    }
    throw std::invalid_argument("unknown backend kind");
}

namespace {
void default_sleep(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

void validate_request(const ChatRequest& request) {
    if (util::trim_view(request.user_text).empty()) {
        throw std::invalid_argument("chat request user_text must be non-empty");
    }
    if (request.temperature < 0.0 || request.temperature > 2.0) {
        throw std::invalid_argument("temperature must be within [0, 2]");
    }
    if (request.max_tokens <= 0) {
        throw std::invalid_argument("max_tokens must be positive");
    }
}
}  // namespace

Gateway::Gateway(BackendConfig chat_config, BackendConfig embed_config, SleepFn sleep)
    : Gateway(make_chat_backend(chat_config), chat_config,
              make_embed_backend(embed_config), embed_config, std::move(sleep)) {}

Gateway::Gateway(std::shared_ptr<ChatBackend> chat, BackendConfig chat_config,
                 std::shared_ptr<EmbedBackend> embed, BackendConfig embed_config, SleepFn sleep)
    : chat_(std::move(chat)),
      embed_(std::move(embed)),
      chat_config_(std::move(chat_config)),
      embed_config_(std::move(embed_config)),
      sleep_(sleep ? std::move(sleep) : default_sleep),
      chat_limiter_(std::make_unique<InflightLimiter>(chat_config_.concurrency)),
      embed_limiter_(std::make_unique<InflightLimiter>(embed_config_.concurrency)) {
    chat_config_.validate();
    embed_config_.validate();
}

template <typename Fn>
auto Gateway::with_retries(const RetryPolicy& policy, Fn&& fn) -> decltype(fn()) {
    std::string last_error;
    for (int attempt = 0; attempt < policy.max_attempts; ++attempt) {
        try {
            return fn();
        } catch (const TransientFailure& e) {
            last_error = e.what();
        }
        if (attempt + 1 == policy.max_attempts) break;
        auto delay = std::chrono::milliseconds(
            static_cast<long long>(policy.base_delay_ms) << attempt);
        sleep_(delay);
    }
    throw ExhaustedRetries("gave up after " + std::to_string(policy.max_attempts) +
                           " attempts; last error: " + last_error);
}

std::string Gateway::chat(const ChatRequest& request) {
    validate_request(request);
    return with_retries(chat_config_.retry, [&] {
        InflightLimiter::Guard guard(*chat_limiter_);
        return util::rtrim(chat_->complete(request));
    });
}

EmbeddingVector normalize(const std::vector<float>& raw) {
    double sq = 0.0;
    for (float v : raw) sq += static_cast<double>(v) * static_cast<double>(v);
    double norm = std::sqrt(sq);
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw MalformedResponse("backend returned a zero or non-finite embedding vector");
    }
    EmbeddingVector out;
    out.norm = norm;
    out.values.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out.values[i] = static_cast<float>(static_cast<double>(raw[i]) / norm);
    }
    return out;
}

std::vector<EmbeddingVector> Gateway::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) return {};
    for (const auto& t : texts) {
        if (util::trim_view(t).empty()) {
            throw std::invalid_argument("embed input texts must be non-empty");
        }
    }
    auto raw = with_retries(embed_config_.retry, [&] {
        InflightLimiter::Guard guard(*embed_limiter_);
        return embed_->embed(texts);
    });
    if (raw.size() != texts.size()) {
        throw MalformedResponse("backend returned " + std::to_string(raw.size()) +
                                " vectors for " + std::to_string(texts.size()) + " texts");
    }
    std::vector<EmbeddingVector> out;
    out.reserve(raw.size());
    for (const auto& vec : raw) {
        if (!out.empty() && vec.size() != out.front().values.size()) {
            throw DimensionMismatch("inconsistent embedding dimensions within one batch");
        }
        out.push_back(normalize(vec));
    }
    return out;
}

std::string Gateway::chat_fingerprint() const { return chat_->fingerprint(); }
std::string Gateway::embed_fingerprint() const { return embed_->fingerprint(); }

}  // namespace toxpair::gateway
