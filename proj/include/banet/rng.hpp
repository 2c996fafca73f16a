#pragma once

#include <cstdint>
#include <vector>

namespace banet {

// PCG32 generator. We own the generator (instead of <random> engines) so that
// streams are reproducible across platforms and trivially serializable into
// checkpoints.
class Pcg32 {
public:
    explicit Pcg32(uint64_t seed = 0x853c49e6748fea9bULL, uint64_t stream = 1) {
        state_ = 0;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += seed;
        next_u32();
    }

    uint32_t next_u32() {
        uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        uint32_t xorshifted = uint32_t(((old >> 18u) ^ old) >> 27u);
        uint32_t rot = uint32_t(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((~rot + 1u) & 31u));
    }

    // Uniform in [0, bound). Modulo bias is irrelevant at our bounds and the
    // result is platform-stable, which is what matters here.
    uint32_t next_below(uint32_t bound) { return bound ? next_u32() % bound : 0; }

    float next_float() { return float(next_u32() >> 8) * (1.0f / 16777216.0f); }   // [0,1)
    double next_double() { return double(next_u32()) * (1.0 / 4294967296.0) +
                                  double(next_u32()) * (1.0 / 18446744073709551616.0); }

    float uniform(float lo, float hi) { return lo + (hi - lo) * next_float(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = next_below(uint32_t(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    uint64_t state() const { return state_; }
    uint64_t inc() const { return inc_; }
    void restore(uint64_t state, uint64_t inc) { state_ = state; inc_ = inc; }

private:
    uint64_t state_;
    uint64_t inc_;
};

// Mixes (seed, epoch, index) into an independent per-sample stream so data
// workers never share generator state and resume is stateless.
inline uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace banet
