#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>

namespace semvis {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Stateless hash of a tuple of counters; used wherever a reproducible stream
/// must be addressable without carrying generator state around.
inline std::uint64_t hash_counters(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                                   std::uint64_t d = 0) {
    std::uint64_t h = splitmix64(a);
    h = splitmix64(h ^ b);
    h = splitmix64(h ^ c);
    return splitmix64(h ^ d);
}

/// Top 53 bits mapped onto [0, 1).
inline double unit_double(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Addresses one dropout mask: (run seed, layer id, step). Entries of the mask
/// are derived by hashing the key with the element index.
struct DropoutKey {
    std::uint64_t seed = 0;
    std::uint64_t layer = 0;
    std::uint64_t step = 0;

    DropoutKey with_layer(std::uint64_t id) const { return {seed, id, step}; }
};

/// Sequential generator for shuffling and sampling. The engine state can be
/// serialized so a resumed run continues the identical stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    double uniform() { return unit_double(engine_()); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) {
            return 0;
        }
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t r = engine_();
        while (r >= limit) {
            r = engine_();
        }
        return r % n;
    }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[below(i)]);
        }
    }

    std::string state() const;
    void restore(const std::string& state);

private:
    std::mt19937_64 engine_;
};

}  // namespace semvis
