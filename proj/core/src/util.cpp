#include "toxpair/util.hpp"

#include <atomic>
#include <cctype>
#include <exception>
#include <mutex>
#include <thread>

namespace toxpair::util {

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t SplitMix64::next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t SplitMix64::next_below(std::uint64_t bound) {
    if (bound == 0) return 0;
    std::uint64_t threshold = -bound % bound;
    for (;;) {
        std::uint64_t r = next();
        if (r >= threshold) return r % bound;
    }
}

double SplitMix64::next_signed_unit() {
    return static_cast<double>(next() >> 11) * (1.0 / 4503599627370496.0) - 1.0;
}

namespace {
bool is_space(unsigned char c) { return std::isspace(c) != 0; }
}  // namespace

std::string_view trim_view(std::string_view text) {
    std::size_t b = 0;
    std::size_t e = text.size();
    while (b < e && is_space(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(text[e - 1]))) --e;
    return text.substr(b, e - b);
}

std::string trim(std::string_view text) { return std::string(trim_view(text)); }

std::string rtrim(std::string_view text) {
    std::size_t e = text.size();
    while (e > 0 && is_space(static_cast<unsigned char>(text[e - 1]))) --e;
    return std::string(text.substr(0, e));
}

std::string to_lower(std::string_view text) {
    std::string out(text);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool loose_equal(std::string_view a, std::string_view b) {
    auto canon = [](std::string_view s) {
        std::string out;
        out.reserve(s.size());
        bool in_space = false;
        for (unsigned char c : trim_view(s)) {
            if (is_space(c)) {
                in_space = true;
                continue;
            }
            if (in_space && !out.empty()) out.push_back(' ');
            in_space = false;
            out.push_back(static_cast<char>(std::tolower(c)));
        }
        return out;
    };
    return canon(a) == canon(b);
}

void parallel_for(std::size_t count, std::size_t max_threads,
                  const std::function<void(std::size_t)>& fn) {
    if (count == 0) return;
    std::size_t workers = std::min(count, std::max<std::size_t>(1, max_threads));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto body = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace toxpair::util
