#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "toxpair/http_backend.hpp"

#include <cstdlib>

#include <nlohmann/json.hpp>

namespace toxpair::gateway {

namespace {

struct SplitUrl {
    std::string scheme_host;  // e.g. https://api.example.com:8443
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = url.find('/', host_start);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpTransport default_transport() {
    return [](const std::string& url, const std::string& bearer,
              const std::string& body) -> HttpResult {
        SplitUrl parts = split_url(url);
        httplib::Client client(parts.scheme_host);
        client.set_connection_timeout(30);
        client.set_read_timeout(120);
        httplib::Headers headers;
        if (!bearer.empty()) {
            headers.emplace("Authorization", "Bearer " + bearer);
        }
        auto res = client.Post(parts.path, headers, body, "application/json");
        if (!res) {
            return {false, httplib::to_string(res.error()), 0, {}};
        }
        return {true, {}, res->status, res->body};
    };
}

std::string bearer_from_env(const std::string& env_name) {
    if (env_name.empty()) return {};
    const char* value = std::getenv(env_name.c_str());
    if (value == nullptr || *value == '\0') {
        throw AuthError("auth env var '" + env_name + "' is not set");
    }
    return value;
}

void raise_for_status(const HttpResult& result) {
    if (!result.transport_ok) {
        throw TransientFailure("transport failure: " + result.transport_error);
    }
    if (result.status == 401 || result.status == 403) {
        throw AuthError("backend rejected credentials (" + std::to_string(result.status) + ")");
    }
    if (result.status == 429) {
        throw RateLimited("backend rate limited the request");
    }
    if (result.status >= 500) {
        throw TransientFailure("backend error " + std::to_string(result.status));
    }
    if (result.status != 200) {
        throw MalformedResponse("unexpected status " + std::to_string(result.status) + ": " +
                                result.body.substr(0, 200));
    }
}

HttpChatBackend::HttpChatBackend(BackendConfig config, HttpTransport transport)
    : config_(std::move(config)),
      transport_(transport ? std::move(transport) : default_transport()) {}

std::string HttpChatBackend::complete(const ChatRequest& request) {
    nlohmann::json body{
        {"model", config_.model},
        {"temperature", request.temperature},
        {"max_tokens", request.max_tokens},
        {"messages", nlohmann::json::array()},
    };
    if (!request.system_text.empty()) {
        body["messages"].push_back({{"role", "system"}, {"content", request.system_text}});
    }
    body["messages"].push_back({{"role", "user"}, {"content", request.user_text}});

    HttpResult result = transport_(config_.endpoint, bearer_from_env(config_.auth_env), body.dump());
    raise_for_status(result);

    nlohmann::json parsed = nlohmann::json::parse(result.body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("choices") || !parsed["choices"].is_array() ||
        parsed["choices"].empty()) {
        throw MalformedResponse("chat response missing choices array");
    }
    const auto& message = parsed["choices"][0];
    if (!message.contains("message") || !message["message"].contains("content") ||
        !message["message"]["content"].is_string()) {
        throw MalformedResponse("chat response missing message content");
    }
    return message["message"]["content"].get<std::string>();
}

std::string HttpChatBackend::fingerprint() const {
    return "http-chat:" + config_.endpoint + ":" + config_.model;
}

HttpEmbedBackend::HttpEmbedBackend(BackendConfig config, HttpTransport transport)
    : config_(std::move(config)),
      transport_(transport ? std::move(transport) : default_transport()) {}

std::vector<std::vector<float>> HttpEmbedBackend::embed(const std::vector<std::string>& texts) {
    nlohmann::json body{{"model", config_.model}, {"input", texts}};

    HttpResult result = transport_(config_.endpoint, bearer_from_env(config_.auth_env), body.dump());
    raise_for_status(result);

    nlohmann::json parsed = nlohmann::json::parse(result.body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("data") || !parsed["data"].is_array()) {
        throw MalformedResponse("embedding response missing data array");
    }
    std::vector<std::vector<float>> out(texts.size());
    std::vector<bool> filled(texts.size(), false);
    std::size_t fallback_index = 0;
    for (const auto& item : parsed["data"]) {
        if (!item.contains("embedding") || !item["embedding"].is_array()) {
            throw MalformedResponse("embedding item missing vector");
        }
        std::size_t index = fallback_index;
        if (item.contains("index") && item["index"].is_number_unsigned()) {
            index = item["index"].get<std::size_t>();
        }
        ++fallback_index;
        if (index >= out.size() || filled[index]) {
            throw MalformedResponse("embedding response indices do not match request");
        }
        auto& vec = out[index];
        vec.reserve(item["embedding"].size());
        for (const auto& v : item["embedding"]) {
            if (!v.is_number()) throw MalformedResponse("non-numeric embedding value");
            vec.push_back(v.get<float>());
        }
        filled[index] = true;
    }
    for (bool f : filled) {
        if (!f) throw MalformedResponse("embedding response is missing entries");
    }
    return out;
}

std::string HttpEmbedBackend::fingerprint() const {
    return "http-embed:" + config_.endpoint + ":" + config_.model;
}

}  // namespace toxpair::gateway
