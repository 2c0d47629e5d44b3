#pragma once

#include <array>
#include <cstdint>

namespace ks {

// One Philox4x32-10 block: 4 output words from a 128-bit counter and 64-bit key.
std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& counter,
                                        const std::array<std::uint32_t, 2>& key);

// Counter-based generator. A stream is fully determined by
// (seed, stream_a, stream_b); simulations use stream_a = path index and
// stream_b = particle index, so replicas and particles draw from
// non-overlapping, order-independent streams. State advances only through
// the block counter, which makes every draw reproducible bit for bit.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream_a = 0, std::uint64_t stream_b = 0);

    std::uint32_t u32();
    std::uint64_t u64();

    // uniform on (0,1), never returns an endpoint
    double uniform();

    // standard normal via Box-Muller; draws come in cached pairs
    double normal();

    // Gamma(shape, 1), shape > 0 (Marsaglia-Tsang, boosted below shape 1)
    double gamma(double shape);

    // exact Poisson(mean): product inversion below mean 12, transformed
    // rejection (PTRS) above; O(1) expected cost at any mean
    std::int64_t poisson(double mean);

private:
    void refill();

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 2> stream_words_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    int have_ = 0;
    double cached_normal_ = 0.0;
    bool have_normal_ = false;
};

} // namespace ks
