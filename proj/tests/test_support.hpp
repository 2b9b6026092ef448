#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>

#include "toxpair/gateway.hpp"
#include "toxpair/mock_backends.hpp"

#ifndef TOXPAIR_SOURCE_DIR
#error "TOXPAIR_SOURCE_DIR must be defined by the build"
#endif

namespace testsupport {

inline std::filesystem::path source_dir() { return TOXPAIR_SOURCE_DIR; }
inline std::filesystem::path asset(const std::string& rel) { return source_dir() / "assets" / rel; }
inline std::filesystem::path fixture(const std::string& rel) {
    return source_dir() / "tests" / "data" / rel;
}

// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& label) {
        static std::atomic<unsigned> counter{0};
        auto base = std::filesystem::temp_directory_path();
        path_ = base / ("toxpair_" + label + "_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

inline toxpair::gateway::BackendConfig mock_chat_config() {
    toxpair::gateway::BackendConfig config;
    config.kind = toxpair::gateway::BackendKind::Mock;
    return config;
}

inline toxpair::gateway::BackendConfig mock_embed_config(int dimension = 16,
                                                         std::uint64_t seed = 7) {
    toxpair::gateway::BackendConfig config;
    config.kind = toxpair::gateway::BackendKind::Mock;
    config.mock_dimension = dimension;
    config.mock_seed = seed;
    return config;
}

struct MockGateway {
    std::shared_ptr<toxpair::gateway::MockChatBackend> chat;
    std::shared_ptr<toxpair::gateway::MockEmbedBackend> embed;
    std::unique_ptr<toxpair::gateway::Gateway> gateway;

    explicit MockGateway(
        toxpair::gateway::MockChatBackend::Handler handler = {},
        int dimension = 16, std::uint64_t seed = 7,
        toxpair::gateway::SleepFn sleep = [](std::chrono::milliseconds) {}) {
        chat = handler ? std::make_shared<toxpair::gateway::MockChatBackend>(std::move(handler))
                       : toxpair::gateway::MockChatBackend::echo();
        embed = std::make_shared<toxpair::gateway::MockEmbedBackend>(dimension, seed);
        gateway = std::make_unique<toxpair::gateway::Gateway>(
            chat, mock_chat_config(), embed, mock_embed_config(dimension, seed), std::move(sleep));
    }

    toxpair::gateway::Gateway& operator*() { return *gateway; }
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << content;
}

}  // namespace testsupport
