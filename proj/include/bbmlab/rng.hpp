#pragma once

#include <cstdint>

namespace bbmlab {

namespace detail {

// SplitMix64 finalizer (Steele, Lea, Flood). Bijective on 64-bit words.
inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

} // namespace detail

// Counter-based random stream (Philox-style 2x64 block function, 10 rounds).
//
// A stream is identified by a 128-bit pair (key, block_hi); the block index
// is the low counter word, so two streams with distinct identities never
// share an output block. (seed, stream_id) maps bijectively onto
// (key, block_hi), which gives overlap-free parallel streams by
// construction. split() derives a child stream by remixing both identity
// words; a collision needs both 64-bit halves to collide, which is
// negligible at any population size this project reaches.
//
// Streams are plain values: copy freely, move across threads, replay by
// reconstructing with the same (seed, stream_id).
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id)
        : key_(detail::splitmix64(seed)),
          block_hi_(detail::splitmix64(stream_id ^ 0x6A09E667F3BCC909ull)),
          block_lo_(0),
          seed_(seed),
          stream_id_(stream_id) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    std::uint64_t next_u64() {
        if (have_buffered_) {
            have_buffered_ = false;
            return buffered_;
        }
        std::uint64_t x0 = block_hi_;
        std::uint64_t x1 = block_lo_++;
        std::uint64_t k = key_;
        for (int round = 0; round < 10; ++round) {
            const unsigned __int128 prod =
                static_cast<unsigned __int128>(0xD2B74407B1CE6E93ull) * x0;
            const std::uint64_t hi = static_cast<std::uint64_t>(prod >> 64);
            const std::uint64_t lo = static_cast<std::uint64_t>(prod);
            x0 = hi ^ k ^ x1;
            x1 = lo;
            k += 0x9E3779B97F4A7C15ull;
        }
        buffered_ = x1;
        have_buffered_ = true;
        return x0;
    }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform on (0, 1): safe to pass through log().
    double uniform_pos() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; the spare is cached, so a stream
    // consumes two uniforms per pair of normals.
    double normal();

    double exponential(double rate = 1.0);

    // Standard Gumbel: -log(-log U).
    double gumbel();

    // Independent child stream. Deterministic in (this stream's identity,
    // child); never touches this stream's counter.
    RngStream split(std::uint64_t child) const {
        RngStream out(*this);
        out.key_ = detail::splitmix64(key_ ^ (0xD1B54A32D192ED03ull * (child + 1)));
        out.block_hi_ = detail::splitmix64(block_hi_ + 0x8CB92BA72F3D8DD7ull * (child + 1));
        out.block_lo_ = 0;
        out.have_buffered_ = false;
        out.have_spare_normal_ = false;
        return out;
    }

private:
    std::uint64_t key_;
    std::uint64_t block_hi_;
    std::uint64_t block_lo_;
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t buffered_ = 0;
    bool have_buffered_ = false;
    double spare_normal_ = 0.0;
    bool have_spare_normal_ = false;
};

} // namespace bbmlab
