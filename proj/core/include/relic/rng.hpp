#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace relic {

// Deterministic stream derivation.
//
// Every random decision in the library draws from an mt19937_64 seeded by
// mixing the master seed with a short purpose tag and integer coordinates
// (epoch, image position, pair ordinal, ...). A stream is therefore a pure
// function of (seed, tag, coordinates): checkpoint resume and parallel view
// generation reproduce the exact same draws without any shared mutable
// generator.

// splitmix64 finalizer; bijective over u64.
uint64_t mix64(uint64_t x);

// Fold one value / a tag into a running hash.
uint64_t combine(uint64_t h, uint64_t v);
uint64_t combine(uint64_t h, std::string_view tag);

template <class... Coords>
uint64_t stream_id(uint64_t seed, std::string_view tag, Coords... coords) {
  uint64_t h = combine(seed, tag);
  ((h = combine(h, static_cast<uint64_t>(coords))), ...);
  return h;
}

std::mt19937_64 make_stream(uint64_t id);

// Draw helpers. Distributions are constructed per call so no hidden
// distribution state survives across checkpoint boundaries.
double runif(std::mt19937_64& g, double lo = 0.0, double hi = 1.0);
double rnorm(std::mt19937_64& g, double mean = 0.0, double sd = 1.0);
// Inclusive integer range [lo, hi].
std::size_t rindex(std::mt19937_64& g, std::size_t lo, std::size_t hi);

// In-place Fisher-Yates shuffle (swap i with uniform j in [0, i]).
template <class T>
void fisher_yates(std::vector<T>& v, std::mt19937_64& g) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = rindex(g, 0, i - 1);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace relic
