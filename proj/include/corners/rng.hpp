#pragma once

#include <cstdint>

namespace corners {

// All randomness in the project flows from one 64-bit master seed through
// counter-based splitmix64 substreams:
//
//   stream  = splitmix64_fin(seed ^ tag)
//   draw(i) = splitmix64_fin(stream + (i + 1) * GOLDEN)
//
// Draws are addressed, not sequential, so parallel fills produce the same
// bits for any thread count. Pinned in reports as "splitmix64-ctr-v1".
inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
inline constexpr const char* kRngVersion = "splitmix64-ctr-v1";

inline std::uint64_t splitmix64_fin(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

inline std::uint64_t substream(std::uint64_t seed, std::uint64_t tag) {
    return splitmix64_fin(seed ^ tag);
}

inline std::uint64_t draw_u64(std::uint64_t stream, std::uint64_t i) {
    return splitmix64_fin(stream + (i + 1) * kGolden);
}

// uniform in [0, 1), 53 mantissa bits
inline double draw_u01(std::uint64_t stream, std::uint64_t i) {
    return static_cast<double>(draw_u64(stream, i) >> 11) * 0x1.0p-53;
}

namespace stream_tag {
inline constexpr std::uint64_t label_x = 0x4C4142454C5F5821ull;
inline constexpr std::uint64_t label_y = 0x4C4142454C5F5921ull;
inline constexpr std::uint64_t label_z = 0x4C4142454C5F5A21ull;
inline constexpr std::uint64_t membership = 0x4D454D4245525348ull;
inline constexpr std::uint64_t corner_trial = 0x434F524E45525452ull;
inline constexpr std::uint64_t optimizer = 0x4F5054494D495A45ull;
inline constexpr std::uint64_t quasi_audit = 0x5155415349415544ull;
inline constexpr std::uint64_t test_data = 0x5445535444415441ull;
}  // namespace stream_tag

// Sequential generator over a substream, for code with data-dependent
// draw counts (rejection sampling, shuffles).
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t stream) : state_(stream) {}

    std::uint64_t next_u64() {
        state_ += kGolden;
        return splitmix64_fin(state_);
    }

    double next_u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // unbiased integer in [0, n) by rejection
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

private:
    std::uint64_t state_;
};

}  // namespace corners
