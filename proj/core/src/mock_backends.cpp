#include "toxpair/mock_backends.hpp"

#include <algorithm>
#include <cstdio>

#include "toxpair/util.hpp"

namespace toxpair::gateway {

void throw_mock_failure(MockFailure failure) {
    switch (failure) {
        case MockFailure::RateLimited:
            throw RateLimited("mock: 429");
        case MockFailure::Transient:
            throw TransientFailure("mock: connection reset");
        case MockFailure::Auth:
            throw AuthError("mock: 401");
        case MockFailure::Malformed:
            throw MalformedResponse("mock: unparseable body");
    }
    throw GatewayError("mock: unknown failure kind");
}

MockChatBackend::MockChatBackend(Handler handler, std::string fingerprint)
    : handler_(std::move(handler)), fingerprint_(std::move(fingerprint)) {}

std::shared_ptr<MockChatBackend> MockChatBackend::echo() {
    return std::make_shared<MockChatBackend>(
        [](const ChatRequest& request) { return request.user_text; }, "mock-chat:echo");
}

namespace {

std::string tag_field(const std::string& tag, const std::string& key) {
    auto pos = tag.find(key + "=");
    if (pos == std::string::npos) return {};
    pos += key.size() + 1;
    auto end = tag.find(':', pos);
    return tag.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
}

int tag_count(const std::string& tag) {
    std::string field = tag_field(tag, "count");
    if (field.empty()) return 1;
    return std::max(1, std::atoi(field.c_str()));
}

// Value after the last "input sentence:" marker in the rendered prompt.
std::string extract_input_sentence(const std::string& user_text) {
    std::string lower = util::to_lower(user_text);
    auto pos = lower.rfind("input sentence:");
    if (pos == std::string::npos) return user_text;
    return util::trim(user_text.substr(pos + std::string("input sentence:").size()));
}

std::string format_items(int count, const std::function<std::string(int)>& item) {
    if (count == 1) return item(0);
    std::string out;
    for (int i = 0; i < count; ++i) {
        out += std::to_string(i + 1) + ". " + item(i);
        if (i + 1 < count) out += "\n";
    }
    return out;
}

std::string pick_weighted(std::uint64_t roll,
                          const std::vector<std::pair<std::string, int>>& table) {
    int total = 0;
    for (const auto& [_, w] : table) total += w;
    int r = static_cast<int>(roll % static_cast<std::uint64_t>(total));
    for (const auto& [label, w] : table) {
        if (r < w) return label;
        r -= w;
    }
    return table.back().first;
}

std::string scripted_reply(const ChatRequest& request, std::uint64_t seed) {
    std::uint64_t base = util::fnv1a64(request.user_text) ^ (seed * 0x9e3779b97f4a7c15ULL);
    const std::string& tag = request.tag;

    if (tag.rfind("generate", 0) == 0) {
        std::string input = extract_input_sentence(request.user_text);
        char suffix[16];
        std::snprintf(suffix, sizeof suffix, " ~tox%02x", static_cast<unsigned>(base % 256));
        return input + suffix;
    }

    if (tag.rfind("filter:", 0) == 0) {
        int count = tag_count(tag);
        std::string variant = tag_field(tag, "variant");
        return format_items(count, [&](int i) {
            std::uint64_t roll = util::SplitMix64(base + static_cast<std::uint64_t>(i)).next();
            if (variant == "context-shift") {
                return pick_weighted(roll, {{"Context maintained", 65}, {"Context shifted", 35}});
            }
            if (variant == "qa-and-paraphrasing") {
                return pick_weighted(roll, {{"Paraphrasing", 55},
                                            {"Question-answer", 20},
                                            {"Arbitrary relationship", 25}});
            }
            if (variant == "qa") {
                return pick_weighted(roll, {{"Arbitrary relationship", 70}, {"Question-answer", 30}});
            }
            if (variant == "derogatory-detection") {
                return pick_weighted(roll, {{"Critical tone", 62}, {"Other tone", 38}});
            }
            if (variant == "tone-classification") {
                return pick_weighted(roll, {{"Implicit", 30}, {"Negative", 35}, {"Neutral", 35}});
            }
            if (variant == "multi-meaning") {
                if (roll % 100 < 60) {
                    char buf[32];
                    std::snprintf(buf, sizeof buf, "score: %.1f",
                                  static_cast<double>(roll / 101 % 51) / 10.0);
                    return std::string(buf);
                }
                return pick_weighted(roll / 7, {{"Single meaning", 40},
                                                {"Multi-positive meaning", 30},
                                                {"Unable to determine", 30}});
            }
            return pick_weighted(roll, {{"Context maintained", 60}, {"Context shifted", 40}});
        });
    }

    if (tag.rfind("eval", 0) == 0) {
        int score = 1 + static_cast<int>(base % 5);
        return "score: " + std::to_string(score) + " based on the stated criteria";
    }

    if (tag.rfind("rank", 0) == 0) {
        int count = tag_count(tag);
        std::vector<int> ranks(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i) ranks[static_cast<std::size_t>(i)] = i + 1;
        util::SplitMix64 rng(base);
        for (std::size_t i = ranks.size(); i > 1; --i) {
            std::swap(ranks[i - 1], ranks[static_cast<std::size_t>(rng.next_below(i))]);
        }
        std::string out;
        for (std::size_t i = 0; i < ranks.size(); ++i) {
            if (i) out += ", ";
            out += std::to_string(ranks[i]);
        }
        return out;
    }

    return request.user_text;
}

}  // namespace

std::shared_ptr<MockChatBackend> MockChatBackend::scripted_pipeline(std::uint64_t seed) {
    return std::make_shared<MockChatBackend>(
        [seed](const ChatRequest& request) { return scripted_reply(request, seed); },
        "mock-chat:pipeline:seed=" + std::to_string(seed));
}

std::string MockChatBackend::complete(const ChatRequest& request) {
    int now = in_flight_.fetch_add(1) + 1;
    int seen = max_in_flight_.load();
    while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
    }
    calls_.fetch_add(1);

    struct Scope {
        std::atomic<int>& counter;
        ~Scope() { counter.fetch_sub(1); }
    } scope{in_flight_};

    {
        std::lock_guard<std::mutex> lock(failures_mutex_);
        if (!pending_failures_.empty()) {
            MockFailure f = pending_failures_.front();
            pending_failures_.pop_front();
            throw_mock_failure(f);
        }
    }
    return handler_(request);
}

void MockChatBackend::fail_next(int count, MockFailure failure) {
    std::lock_guard<std::mutex> lock(failures_mutex_);
    for (int i = 0; i < count; ++i) pending_failures_.push_back(failure);
}

MockEmbedBackend::MockEmbedBackend(int dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {}

std::vector<std::vector<float>> MockEmbedBackend::embed(const std::vector<std::string>& texts) {
    calls_.fetch_add(1);
    {
        std::lock_guard<std::mutex> lock(failures_mutex_);
        if (!pending_failures_.empty()) {
            MockFailure f = pending_failures_.front();
            pending_failures_.pop_front();
            throw_mock_failure(f);
        }
    }
    std::vector<std::vector<float>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        util::SplitMix64 rng(util::fnv1a64(text) ^ (seed_ * 0xd1b54a32d192ed03ULL));
        std::vector<float> vec(static_cast<std::size_t>(dimension_));
        for (auto& v : vec) v = static_cast<float>(rng.next_signed_unit());
        out.push_back(std::move(vec));
    }
    return out;
}

std::string MockEmbedBackend::fingerprint() const {
    return "mock-embed:d=" + std::to_string(dimension_) + ":seed=" + std::to_string(seed_);
}

void MockEmbedBackend::fail_next(int count, MockFailure failure) {
    std::lock_guard<std::mutex> lock(failures_mutex_);
    for (int i = 0; i < count; ++i) pending_failures_.push_back(failure);
}

}  // namespace toxpair::gateway
