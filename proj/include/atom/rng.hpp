#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace atom {

// Deterministic counter-based generator. All randomness in the pipeline flows
// from one master seed through named streams, so independent components can
// draw without perturbing each other's sequences.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(splitmix(seed + 0x9e3779b97f4a7c15ull)) {}

    Rng(std::uint64_t master_seed, std::string_view stream)
        : Rng(master_seed ^ fnv1a(stream)) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        return splitmix(state_);
    }

    // Uniform in [0, 1) with 24 bits of mantissa; identical on every platform.
    float next_float() { return static_cast<float>(next_u64() >> 40) * (1.0f / 16777216.0f); }

    double next_double() { return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0); }

    // Uniform in [0, n).
    std::uint64_t next_below(std::uint64_t n) { return n ? next_u64() % n : 0; }

    float uniform(float lo, float hi) { return lo + (hi - lo) * next_float(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Sample k distinct indices from [0, n) without replacement, ascending order not guaranteed.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        shuffle(idx);
        idx.resize(k < n ? k : n);
        return idx;
    }

    static std::uint64_t fnv1a(std::string_view s) {
        std::uint64_t h = 1469598103934665603ull;
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
        return h;
    }

private:
    static std::uint64_t splitmix(std::uint64_t x) {
        x ^= x >> 30;
        x *= 0xbf58476d1ce4e5b9ull;
        x ^= x >> 27;
        x *= 0x94d049bb133111ebull;
        x ^= x >> 31;
        return x;
    }

    std::uint64_t state_;
};

}  // namespace atom
