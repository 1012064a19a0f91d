#pragma once

// Counter-based random streams.
//
// A stream is a 64-bit key plus a draw counter; the n-th output is
// splitmix64(key + n * golden). Child streams are derived by hashing the parent
// key with an index, so a Monte Carlo run r at step t always sees the same
// numbers no matter which worker executes it or in which order.

#include <cstdint>
#include <limits>

namespace drsim {

inline constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class CounterStream {
public:
    using result_type = std::uint64_t;

    constexpr explicit CounterStream(std::uint64_t key = 0) noexcept : key_(key) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept {
        ++counter_;
        return splitmix64(key_ + counter_ * kGolden);
    }

    /// Independent child stream; does not advance this stream.
    constexpr CounterStream split(std::uint64_t index) const noexcept {
        return CounterStream(splitmix64(key_ ^ splitmix64(index + kSplitSalt)));
    }

    constexpr std::uint64_t key() const noexcept { return key_; }
    constexpr std::uint64_t draws() const noexcept { return counter_; }

private:
    static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
    static constexpr std::uint64_t kSplitSalt = 0x632be59bd9b4e019ULL;

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Uniform double in [0, 1) from the top 53 bits of one draw. Unlike
/// std::uniform_real_distribution this is the same on every standard library.
inline double uniform01(CounterStream& stream) noexcept {
    return static_cast<double>(stream() >> 11) * 0x1.0p-53;
}

inline double uniform(CounterStream& stream, double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform01(stream);
}

/// Stream for (run, step) under a master seed.
inline constexpr CounterStream substream(std::uint64_t master_seed, std::uint64_t run,
                                         std::uint64_t step) noexcept {
    return CounterStream(master_seed).split(run).split(step);
}

}  // namespace drsim
