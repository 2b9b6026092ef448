#pragma once

#include <functional>
#include <string>
#include <vector>

#include "toxpair/gateway.hpp"

namespace toxpair::gateway {

struct HttpResult {
    bool transport_ok = false;   // false means the request never got a status
    std::string transport_error;
    int status = 0;
    std::string body;
};

// POSTs a JSON body to a URL with an optional bearer token. The default
// transport uses cpp-httplib; tests inject scripted ones.
using HttpTransport =
    std::function<HttpResult(const std::string& url, const std::string& bearer_token,
                             const std::string& json_body)>;

HttpTransport default_transport();

// OpenAI-style chat completions: POST {model, messages, temperature,
// max_tokens} -> choices[0].message.content.
class HttpChatBackend : public ChatBackend {
public:
    explicit HttpChatBackend(BackendConfig config, HttpTransport transport = {});

    std::string complete(const ChatRequest& request) override;
    std::string fingerprint() const override;

private:
    BackendConfig config_;
    HttpTransport transport_;
};

// OpenAI-style embeddings: POST {model, input: [texts]} -> data[i].embedding.
class HttpEmbedBackend : public EmbedBackend {
public:
    explicit HttpEmbedBackend(BackendConfig config, HttpTransport transport = {});

    std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) override;
    std::string fingerprint() const override;

private:
    BackendConfig config_;
    HttpTransport transport_;
};

// Shared status handling: 401/403 -> AuthError, 429 -> RateLimited,
// 5xx/transport failure -> TransientFailure, other non-200 -> MalformedResponse.
void raise_for_status(const HttpResult& result);

std::string bearer_from_env(const std::string& env_name);

}  // namespace toxpair::gateway
