#pragma once

#include <cstdint>
#include <string_view>

namespace kbie {

// Deterministic splitmix64 stream. Every source of randomness in the project
// derives from one master seed through named substreams, so a config seed
// fully pins corpora, initializations, dropout masks and negative samples.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // [0, n)
    int next_int(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

    // Derive an independent stream identified by name. FNV-1a over the name,
    // mixed with the parent state so distinct parents stay distinct.
    Rng substream(std::string_view name) const {
        uint64_t h = 0xcbf29ce484222325ULL;
        for (char c : name) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        return Rng(state_ ^ (h + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
    }

    Rng substream(std::string_view name, uint64_t index) const {
        Rng r = substream(name);
        r.state_ ^= 0x94d049bb133111ebULL * (index + 1);
        return r;
    }

private:
    uint64_t state_;
};

}  // namespace kbie
