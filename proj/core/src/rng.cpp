#include "relic/rng.hpp"

namespace relic {

uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

uint64_t combine(uint64_t h, uint64_t v) { return mix64(h ^ mix64(v)); }

uint64_t combine(uint64_t h, std::string_view tag) {
  for (char c : tag) h = combine(h, static_cast<uint64_t>(static_cast<unsigned char>(c)));
  return h;
}

std::mt19937_64 make_stream(uint64_t id) { return std::mt19937_64(mix64(id)); }

double runif(std::mt19937_64& g, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

double rnorm(std::mt19937_64& g, double mean, double sd) {
  std::normal_distribution<double> d(mean, sd);
  return d(g);
}

std::size_t rindex(std::mt19937_64& g, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(g);
}

}  // namespace relic
