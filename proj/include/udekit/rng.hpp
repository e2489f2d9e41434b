#pragma once

#include <cstdint>
#include <string_view>

namespace udekit {

// Stateless 64-bit mixer (splitmix64 finalizer). All randomness in the
// library is built on top of this so that results are bit-reproducible
// across platforms and independent of evaluation order.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Derive a child seed from a parent seed, a textual tag and up to two
// integer coordinates. Used to key independent random streams (per path,
// per epoch, per trajectory) so that stream k never depends on how many
// other streams were consumed before it.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag,
                          std::uint64_t a = 0, std::uint64_t b = 0);

// Uniform double in [0, 1) from 64 random bits.
inline double bits_to_unit(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Standard normal draw keyed by (seed, index, channel); stateless.
// Counter-based: the value depends only on the key, never on call order.
double normal_at(std::uint64_t seed, std::uint64_t index, std::uint64_t channel);

// Small stateful generator for ad-hoc sampling (parameter init, shuffles,
// observation noise). Internally a counter keyed by the seed.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t next_u64() { return mix64(seed_ ^ mix64(counter_++)); }

    double uniform() { return bits_to_unit(next_u64()); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; consumes two words.
    double normal();

    // Uniform integer in [lo, hi], inclusive. Rejection sampled.
    std::uint64_t below(std::uint64_t n);
    int uniform_int(int lo, int hi);

    // Poisson counts via Knuth's product method, chunked for large means.
    int poisson(double lambda);

  private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

} // namespace udekit
