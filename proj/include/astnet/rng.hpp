#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace astnet {

std::uint64_t splitmix64(std::uint64_t x);

// FNV-1a, stable across platforms (unlike std::hash).
std::uint64_t hash_string(std::string_view text);

// Deterministic random stream. Distributions are computed here rather than via
// <random> distribution classes so sequences are identical across standard
// library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    // Independent stream for a (root seed, path...) pair, e.g. (seed, epoch, sample).
    static Rng derive(std::uint64_t root, std::initializer_list<std::uint64_t> path);

    std::uint64_t next_u64() { return engine_(); }
    double uniform();  // [0, 1)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    std::size_t below(std::size_t n);  // uniform integer in [0, n)
    bool bernoulli(double p) { return uniform() < p; }

    template <class T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[below(i)]);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace astnet
