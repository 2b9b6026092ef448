#include "toxpair/perspective.hpp"

#include <nlohmann/json.hpp>

#include "toxpair/util.hpp"

namespace toxpair::eval {

double MockPerspectiveClient::score(const std::string& text) {
    if (has_fixed_) return fixed_;
    std::uint64_t h = util::fnv1a64(text) ^ (seed_ * 0x9e3779b97f4a7c15ULL);
    return static_cast<double>(h % 10001) / 10000.0;
}

HttpPerspectiveClient::HttpPerspectiveClient(std::string endpoint, std::string api_key_env,
                                             gateway::HttpTransport transport)
    : endpoint_(std::move(endpoint)),
      api_key_env_(std::move(api_key_env)),
      transport_(transport ? std::move(transport) : gateway::default_transport()) {}

double HttpPerspectiveClient::score(const std::string& text) {
    nlohmann::json body{{"comment", {{"text", text}}},
                        {"requestedAttributes", {{"TOXICITY", nlohmann::json::object()}}}};
    // The Comment Analyzer API takes the key as a query parameter.
    std::string url = endpoint_ + "?key=" + gateway::bearer_from_env(api_key_env_);
    gateway::HttpResult result = transport_(url, "", body.dump());
    gateway::raise_for_status(result);

    nlohmann::json parsed = nlohmann::json::parse(result.body, nullptr, false);
    if (parsed.is_discarded()) {
        throw gateway::MalformedResponse("perspective reply is not JSON");
    }
    try {
        return parsed.at("attributeScores").at("TOXICITY").at("summaryScore").at("value")
            .get<double>();
    } catch (const nlohmann::json::exception&) {
        throw gateway::MalformedResponse("perspective reply lacks a TOXICITY summary score");
    }
}

PerspectiveResult perspective_score(std::span<const std::string> texts,
                                    PerspectiveClient& client) {
    PerspectiveResult result;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        try {
            double p = client.score(texts[i]);
            result.scored.push_back({i, p, 1.0 + 4.0 * p});
        } catch (const std::exception&) {
            result.failed.push_back(i);
        }
    }
    return result;
}

}  // namespace toxpair::eval
