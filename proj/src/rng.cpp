#include "udekit/rng.hpp"

#include <cmath>

namespace udekit {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag,
                          std::uint64_t a, std::uint64_t b) {
    // FNV-1a over the tag folds the stream name into the key.
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    std::uint64_t x = mix64(seed ^ h);
    x = mix64(x ^ mix64(a + 0x632be59bd9b4e019ull));
    x = mix64(x ^ mix64(b + 0x9e6c63d0876a9a47ull));
    return x;
}

double normal_at(std::uint64_t seed, std::uint64_t index, std::uint64_t channel) {
    const std::uint64_t key = mix64(seed ^ mix64(index * 0x9e3779b97f4a7c15ull + channel));
    // Two salted substreams feed Box-Muller; u1 shifted into (0, 1].
    const double u1 = (static_cast<double>(mix64(key ^ 0x8538ecb5bd456ea3ull) >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = bits_to_unit(mix64(key ^ 0x40ead42ca1cd0131ull));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

double Rng::normal() {
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = bits_to_unit(next_u64());
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
}

int Rng::uniform_int(int lo, int hi) {
    return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo) + 1));
}

int Rng::poisson(double lambda) {
    int count = 0;
    // Knuth's method degrades for large means; split into chunks of 30.
    while (lambda > 30.0) {
        const double chunk = 30.0;
        const double l = std::exp(-chunk);
        double p = 1.0;
        int k = 0;
        do {
            ++k;
            p *= uniform();
        } while (p > l);
        count += k - 1;
        lambda -= chunk;
    }
    const double l = std::exp(-lambda);
    double p = 1.0;
    int k = 0;
    do {
        ++k;
        p *= uniform();
    } while (p > l);
    return count + k - 1;
}

} // namespace udekit
