#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace toxpair::util {

// FNV-1a, used wherever the artifact needs a stable, platform-independent
// text hash (mock embeddings, seeded sampling, split canonicalization).
std::uint64_t fnv1a64(std::string_view text);

// SplitMix64 stream; deterministic across platforms, unlike std::shuffle
// with a stdlib-specific distribution.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next();

    // Uniform in [0, bound) via rejection sampling.
    std::uint64_t next_below(std::uint64_t bound);

    // Uniform in [-1, 1).
    double next_signed_unit();

private:
    std::uint64_t state_;
};

// Fisher-Yates with a SplitMix64 stream.
template <typename T>
void deterministic_shuffle(std::vector<T>& items, std::uint64_t seed) {
    SplitMix64 rng(seed);
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(items[i - 1], items[j]);
    }
}

std::string_view trim_view(std::string_view text);
std::string trim(std::string_view text);
std::string rtrim(std::string_view text);
std::string to_lower(std::string_view text);

// Case-insensitive comparison after collapsing runs of whitespace.
bool loose_equal(std::string_view a, std::string_view b);

// Runs fn(0..count-1) on up to max_threads workers; rethrows the first
// exception after all workers join.
void parallel_for(std::size_t count, std::size_t max_threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace toxpair::util
