#include "crnpost/sobol.hpp"

#include <random>
#include <stdexcept>
#include <string>

namespace crnpost {

namespace {

#include "sobol_direction_numbers.inc"

constexpr int kBits = 32;

std::uint32_t reverse_bits(std::uint32_t x) {
    x = ((x >> 1) & 0x55555555u) | ((x & 0x55555555u) << 1);
    x = ((x >> 2) & 0x33333333u) | ((x & 0x33333333u) << 2);
    x = ((x >> 4) & 0x0f0f0f0fu) | ((x & 0x0f0f0f0fu) << 4);
    x = ((x >> 8) & 0x00ff00ffu) | ((x & 0x00ff00ffu) << 8);
    return (x >> 16) | (x << 16);
}

// Laine-Karras style hash: each output bit depends only on equal or lower input bits.
std::uint32_t laine_karras(std::uint32_t x, std::uint32_t seed) {
    x += seed;
    x ^= x * 0x6c50b47cu;
    x ^= x * 0xb82f1e52u;
    x ^= x * 0xc7afe638u;
    x ^= x * 0x8d22f6e6u;
    return x;
}

std::uint32_t owen_scramble(std::uint32_t x, std::uint32_t seed) {
    return reverse_bits(laine_karras(reverse_bits(x), seed));
}

int degree(std::uint32_t poly) {
    int d = -1;
    while (poly) {
        poly >>= 1;
        ++d;
    }
    return d;
}

}  // namespace

std::size_t SobolSequence::max_dimension() { return kSobolMaxDim; }

SobolSequence::SobolSequence(std::size_t dim, bool scramble, std::uint64_t seed)
    : dim_(dim), scramble_(scramble), directions_(dim * kBits, 0u) {
    if (dim > kSobolMaxDim)
        throw std::invalid_argument("Sobol dimension " + std::to_string(dim) + " exceeds the supported " +
                                    std::to_string(kSobolMaxDim));
    for (std::size_t d = 0; d < dim; ++d) {
        std::uint32_t* v = directions_.data() + d * kBits;
        if (d == 0) {
            for (int k = 0; k < kBits; ++k) v[k] = 1u << (kBits - 1 - k);
            continue;
        }
        const std::uint32_t poly = kSobolPoly[d];
        const int s = degree(poly);
        const std::uint32_t a = (poly >> 1) & ((1u << (s - 1)) - 1u);
        for (int k = 0; k < s && k < kBits; ++k) v[k] = kSobolInit[d][k] << (kBits - 1 - k);
        for (int k = s; k < kBits; ++k) {
            std::uint32_t x = v[k - s] ^ (v[k - s] >> s);
            for (int i = 1; i < s; ++i)
                if ((a >> (s - 1 - i)) & 1u) x ^= v[k - i];
            v[k] = x;
        }
    }
    if (scramble_) {
        std::mt19937_64 rng(seed);
        seeds_.resize(dim);
        for (auto& sd : seeds_) sd = static_cast<std::uint32_t>(rng() >> 32);
    }
}

std::vector<double> SobolSequence::point(std::uint32_t index) const {
    std::vector<double> out(dim_);
    for (std::size_t d = 0; d < dim_; ++d) {
        const std::uint32_t* v = directions_.data() + d * kBits;
        std::uint32_t x = 0;
        for (int k = 0; k < kBits; ++k)
            if ((index >> k) & 1u) x ^= v[k];
        if (scramble_) x = owen_scramble(x, seeds_[d]);
        out[d] = static_cast<double>(x) / 4294967296.0;
    }
    return out;
}

std::vector<std::vector<double>> SobolSequence::take(std::size_t n) const {
    std::vector<std::vector<double>> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) pts.push_back(point(static_cast<std::uint32_t>(i)));
    return pts;
}

}  // namespace crnpost
