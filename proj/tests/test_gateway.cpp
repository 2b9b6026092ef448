#include <doctest.h>

#include <atomic>
#include <cmath>
#include <thread>

#include <nlohmann/json.hpp>

#include "test_support.hpp"
#include "toxpair/http_backend.hpp"
#include "toxpair/util.hpp"

using namespace toxpair;
using testsupport::MockGateway;

TEST_CASE("echo mock returns the request text verbatim") {
    MockGateway mock;
    gateway::ChatRequest request;
    request.user_text = "x";
    CHECK(mock->chat(request) == "x");
}

TEST_CASE("chat trims trailing whitespace only") {
    MockGateway mock([](const gateway::ChatRequest&) { return std::string("  keep left \t\n"); });
    gateway::ChatRequest request;
    request.user_text = "anything";
    CHECK(mock->chat(request) == "  keep left");
}

TEST_CASE("retry schedule follows base_delay * 2^attempt then exhausts") {
    std::vector<long long> sleeps;
    auto record = [&sleeps](std::chrono::milliseconds d) { sleeps.push_back(d.count()); };

    auto chat = gateway::MockChatBackend::echo();
    chat->fail_next(3, gateway::MockFailure::RateLimited);

    gateway::BackendConfig config = testsupport::mock_chat_config();
    config.retry.max_attempts = 3;
    config.retry.base_delay_ms = 100;
    gateway::Gateway gw(chat, config, std::make_shared<gateway::MockEmbedBackend>(4, 0),
                        testsupport::mock_embed_config(4, 0), record);

    gateway::ChatRequest request;
    request.user_text = "hi";
    CHECK_THROWS_AS(gw.chat(request), gateway::ExhaustedRetries);
    CHECK(sleeps == std::vector<long long>{100, 200});
    CHECK(chat->calls() == 3);
}

TEST_CASE("transient failure then success stops retrying") {
    std::vector<long long> sleeps;
    auto chat = gateway::MockChatBackend::echo();
    chat->fail_next(1, gateway::MockFailure::Transient);

    gateway::BackendConfig config = testsupport::mock_chat_config();
    config.retry.max_attempts = 4;
    config.retry.base_delay_ms = 50;
    gateway::Gateway gw(chat, config, std::make_shared<gateway::MockEmbedBackend>(4, 0),
                        testsupport::mock_embed_config(4, 0),
                        [&](std::chrono::milliseconds d) { sleeps.push_back(d.count()); });

    gateway::ChatRequest request;
    request.user_text = "hello";
    CHECK(gw.chat(request) == "hello");
    // attempts observed = min(max_attempts, attempts-until-success)
    CHECK(chat->calls() == 2);
    CHECK(sleeps == std::vector<long long>{50});
}

TEST_CASE("auth errors are not retried") {
    auto chat = gateway::MockChatBackend::echo();
    chat->fail_next(1, gateway::MockFailure::Auth);
    gateway::BackendConfig config = testsupport::mock_chat_config();
    config.retry.max_attempts = 5;
    int sleep_calls = 0;
    gateway::Gateway gw(chat, config, std::make_shared<gateway::MockEmbedBackend>(4, 0),
                        testsupport::mock_embed_config(4, 0),
                        [&](std::chrono::milliseconds) { ++sleep_calls; });

    gateway::ChatRequest request;
    request.user_text = "hi";
    CHECK_THROWS_AS(gw.chat(request), gateway::AuthError);
    CHECK(chat->calls() == 1);
    CHECK(sleep_calls == 0);
}

TEST_CASE("request preconditions are enforced") {
    MockGateway mock;
    gateway::ChatRequest request;
    request.user_text = "   ";
    CHECK_THROWS_AS(mock->chat(request), std::invalid_argument);
    request.user_text = "ok";
    request.temperature = 2.5;
    CHECK_THROWS_AS(mock->chat(request), std::invalid_argument);
    request.temperature = 1.0;
    request.max_tokens = 0;
    CHECK_THROWS_AS(mock->chat(request), std::invalid_argument);
}

TEST_CASE("in-flight chat calls never exceed the concurrency limit") {
    auto handler = [](const gateway::ChatRequest& r) {
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
        return r.user_text;
    };
    auto chat = std::make_shared<gateway::MockChatBackend>(handler);
    gateway::BackendConfig config = testsupport::mock_chat_config();
    config.concurrency = 4;
    gateway::Gateway gw(chat, config, std::make_shared<gateway::MockEmbedBackend>(4, 0),
                        testsupport::mock_embed_config(4, 0));

    auto batch = [&gw] {
        std::vector<std::thread> threads;
        for (int i = 0; i < 8; ++i) {
            threads.emplace_back([&gw, i] {
                gateway::ChatRequest request;
                request.user_text = "req " + std::to_string(i);
                gw.chat(request);
            });
        }
        for (auto& t : threads) t.join();
    };
    std::thread first(batch), second(batch);
    first.join();
    second.join();

    CHECK(chat->calls() == 32);
    CHECK(chat->max_in_flight() <= 4);
}

TEST_CASE("embed normalizes the 3-4-5 vector gateway-side") {
    class RawBackend : public gateway::EmbedBackend {
    public:
        std::vector<std::vector<float>> embed(const std::vector<std::string>& texts) override {
            return std::vector<std::vector<float>>(texts.size(), {3.0f, 4.0f});
        }
        std::string fingerprint() const override { return "raw"; }
    };
    gateway::Gateway gw(gateway::MockChatBackend::echo(), testsupport::mock_chat_config(),
                        std::make_shared<RawBackend>(), testsupport::mock_embed_config());
    auto out = gw.embed({"t"});
    REQUIRE(out.size() == 1);
    CHECK(out[0].values[0] == doctest::Approx(0.6));
    CHECK(out[0].values[1] == doctest::Approx(0.8));
    CHECK(out[0].norm == doctest::Approx(5.0));
}

TEST_CASE("embed of empty input is empty") {
    MockGateway mock;
    CHECK(mock->embed({}).empty());
}

TEST_CASE("mock embeddings are deterministic and unit length") {
    MockGateway mock;
    auto a = mock->embed({"같은 문장", "another one"});
    auto b = mock->embed({"같은 문장", "another one"});
    REQUIRE(a.size() == 2);
    CHECK(a[0].values == b[0].values);
    CHECK(a[1].values == b[1].values);
    for (const auto& v : a) {
        double sq = 0.0;
        for (float x : v.values) sq += static_cast<double>(x) * x;
        CHECK(std::abs(std::sqrt(sq) - 1.0) <= 1e-6);
    }
}

TEST_CASE("inconsistent dimensions within one batch are rejected") {
    class BadBackend : public gateway::EmbedBackend {
    public:
        std::vector<std::vector<float>> embed(const std::vector<std::string>&) override {
            return {{1.0f, 0.0f}, {1.0f, 0.0f, 0.0f}};
        }
        std::string fingerprint() const override { return "bad"; }
    };
    gateway::Gateway gw(gateway::MockChatBackend::echo(), testsupport::mock_chat_config(),
                        std::make_shared<BadBackend>(), testsupport::mock_embed_config());
    CHECK_THROWS_AS(gw.embed({"a", "b"}), gateway::DimensionMismatch);
}

TEST_CASE("mock chat is referentially transparent") {
    MockGateway mock;
    gateway::ChatRequest request;
    request.user_text = "same request";
    request.tag = "eval:criterion=fluency";
    CHECK(mock->chat(request) == mock->chat(request));
}

TEST_CASE("http chat backend maps statuses to the error family") {
    auto scripted = [](int status, std::string body) {
        return [status, body](const std::string&, const std::string&,
                              const std::string&) -> gateway::HttpResult {
            return {true, "", status, body};
        };
    };
    gateway::BackendConfig config;
    config.kind = gateway::BackendKind::HttpChat;
    config.endpoint = "http://example.test/v1/chat/completions";
    config.model = "test-model";

    gateway::ChatRequest request;
    request.user_text = "ping";

    CHECK_THROWS_AS(gateway::HttpChatBackend(config, scripted(401, "{}")).complete(request),
                    gateway::AuthError);
    CHECK_THROWS_AS(gateway::HttpChatBackend(config, scripted(429, "{}")).complete(request),
                    gateway::RateLimited);
    CHECK_THROWS_AS(gateway::HttpChatBackend(config, scripted(500, "{}")).complete(request),
                    gateway::TransientFailure);
    CHECK_THROWS_AS(gateway::HttpChatBackend(config, scripted(200, "not json")).complete(request),
                    gateway::MalformedResponse);
    CHECK_THROWS_AS(
        gateway::HttpChatBackend(config, scripted(200, R"({"choices":[]})")).complete(request),
        gateway::MalformedResponse);

    auto ok = scripted(200, R"({"choices":[{"message":{"content":"pong"}}]})");
    CHECK(gateway::HttpChatBackend(config, ok).complete(request) == "pong");

    // Transport failures surface as retryable transients.
    auto down = [](const std::string&, const std::string&,
                   const std::string&) -> gateway::HttpResult {
        return {false, "connection refused", 0, ""};
    };
    CHECK_THROWS_AS(gateway::HttpChatBackend(config, down).complete(request),
                    gateway::TransientFailure);
}

TEST_CASE("http chat backend sends an OpenAI-style body") {
    std::string captured_url, captured_body;
    auto capture = [&](const std::string& url, const std::string&,
                       const std::string& body) -> gateway::HttpResult {
        captured_url = url;
        captured_body = body;
        return {true, "", 200, R"({"choices":[{"message":{"content":"ok"}}]})"};
    };
    gateway::BackendConfig config;
    config.kind = gateway::BackendKind::HttpChat;
    config.endpoint = "https://api.example.test/v1/chat/completions";
    config.model = "m-1";

    gateway::ChatRequest request;
    request.system_text = "sys";
    request.user_text = "usr";
    request.temperature = 0.5;
    request.max_tokens = 77;
    gateway::HttpChatBackend(config, capture).complete(request);

    CHECK(captured_url == config.endpoint);
    auto body = nlohmann::json::parse(captured_body);
    CHECK(body["model"] == "m-1");
    CHECK(body["temperature"] == doctest::Approx(0.5));
    CHECK(body["max_tokens"] == 77);
    REQUIRE(body["messages"].size() == 2);
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(body["messages"][1]["content"] == "usr");
}

TEST_CASE("http embed backend reorders by index and validates entries") {
    auto scripted = [](std::string body) {
        return [body](const std::string&, const std::string&,
                      const std::string&) -> gateway::HttpResult {
            return {true, "", 200, body};
        };
    };
    gateway::BackendConfig config;
    config.kind = gateway::BackendKind::HttpEmbed;
    config.endpoint = "http://example.test/v1/embeddings";
    config.model = "e-1";

    auto ok = scripted(
        R"({"data":[{"index":1,"embedding":[0.0,2.0]},{"index":0,"embedding":[3.0,4.0]}]})");
    auto vectors = gateway::HttpEmbedBackend(config, ok).embed({"a", "b"});
    REQUIRE(vectors.size() == 2);
    CHECK(vectors[0] == std::vector<float>{3.0f, 4.0f});
    CHECK(vectors[1] == std::vector<float>{0.0f, 2.0f});

    auto missing = scripted(R"({"data":[{"index":0,"embedding":[1.0]}]})");
    CHECK_THROWS_AS(gateway::HttpEmbedBackend(config, missing).embed({"a", "b"}),
                    gateway::MalformedResponse);
}

TEST_CASE("missing auth env var raises AuthError before any request") {
    gateway::BackendConfig config;
    config.kind = gateway::BackendKind::HttpChat;
    config.endpoint = "http://example.test/v1/chat/completions";
    config.auth_env = "TOXPAIR_TEST_UNSET_TOKEN_VAR";
    bool transport_hit = false;
    auto transport = [&](const std::string&, const std::string&,
                         const std::string&) -> gateway::HttpResult {
        transport_hit = true;
        return {true, "", 200, "{}"};
    };
    gateway::ChatRequest request;
    request.user_text = "x";
    CHECK_THROWS_AS(gateway::HttpChatBackend(config, transport).complete(request),
                    gateway::AuthError);
    CHECK_FALSE(transport_hit);
}

TEST_CASE("backend config invariants") {
    gateway::BackendConfig config;
    config.retry.max_attempts = 0;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
    config.retry.max_attempts = 1;
    config.concurrency = 0;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
    config.concurrency = 1;
    CHECK_NOTHROW(config.validate());
}
