#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "wfoms/rational.hpp"

namespace wfoms {

// Seedable generator producing uniform integers in arbitrary ranges. The
// same seed and problem give the same sample sequence on every platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t word() { return engine_(); }

  // Unbiased uniform draw in [0, n) via rejection.
  uint64_t below(uint64_t n) {
    if (n == 0) throw std::invalid_argument("empty range");
    if (n == 1) return 0;
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

  // Unbiased uniform draw in [0, n) for arbitrary-precision n.
  Integer below(const Integer& n) {
    if (n <= 0) throw std::invalid_argument("empty range");
    if (n == 1) return Integer(0);
    if (n.fits_ulong_p())
      return Integer(static_cast<unsigned long>(below(static_cast<uint64_t>(n.get_ui()))));
    size_t bits = mpz_sizeinbase(n.get_mpz_t(), 2);
    size_t words = (bits + 63) / 64;
    while (true) {
      Integer v(0);
      for (size_t i = 0; i < words; ++i) {
        uint64_t w = engine_();
        mpz_mul_2exp(v.get_mpz_t(), v.get_mpz_t(), 64);
        Integer chunk;
        mpz_import(chunk.get_mpz_t(), 1, 1, sizeof(uint64_t), 0, 0, &w);
        v += chunk;
      }
      // keep only `bits` low bits so the acceptance rate is at least 1/2
      mpz_fdiv_r_2exp(v.get_mpz_t(), v.get_mpz_t(), bits);
      if (v < n) return v;
    }
  }

  // Fisher-Yates with exact uniform index draws.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (size_t i = items.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(static_cast<uint64_t>(i)));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Deterministic per-run seed derivation (splitmix64 over seed and run index)
// so that `-n N --jobs J` output is independent of J.
inline uint64_t derive_subseed(uint64_t seed, uint64_t run_index) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (run_index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Exact draw: index i comes out with probability w_i / sum(w). Weights are
// brought to a common denominator and a single uniform integer picks the
// cumulative slot; no floating point is involved.
inline size_t draw_discrete(const std::vector<Rational>& weights, Rng& rng) {
  if (weights.empty()) throw std::invalid_argument("draw_discrete: no weights");
  Integer denom(1);
  for (const auto& w : weights) {
    if (w < 0) throw std::invalid_argument("draw_discrete: negative weight");
    mpz_lcm(denom.get_mpz_t(), denom.get_mpz_t(), w.get_den().get_mpz_t());
  }
  std::vector<Integer> numerators;
  numerators.reserve(weights.size());
  Integer total(0);
  for (const auto& w : weights) {
    Integer n = w.get_num() * (denom / w.get_den());
    total += n;
    numerators.push_back(std::move(n));
  }
  if (total == 0) throw std::invalid_argument("draw_discrete: all weights are zero");
  Integer u = rng.below(total);
  Integer cumulative(0);
  for (size_t i = 0; i < numerators.size(); ++i) {
    cumulative += numerators[i];
    if (u < cumulative) return i;
  }
  return numerators.size() - 1;  // unreachable
}

}  // namespace wfoms
