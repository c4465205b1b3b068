#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace wfoms {

using Integer = mpz_class;
using Rational = mpq_class;

inline Integer int_pow(const Integer& base, unsigned long exp) {
  Integer out;
  mpz_pow_ui(out.get_mpz_t(), base.get_mpz_t(), exp);
  return out;
}

inline Rational rat_pow(const Rational& base, unsigned long exp) {
  if (exp == 0) return Rational(1);
  Rational out;
  mpz_pow_ui(out.get_num_mpz_t(), base.get_num().get_mpz_t(), exp);
  mpz_pow_ui(out.get_den_mpz_t(), base.get_den().get_mpz_t(), exp);
  // base is canonical, so num^e / den^e already is
  return out;
}

inline Integer factorial(unsigned long n) {
  Integer out;
  mpz_fac_ui(out.get_mpz_t(), n);
  return out;
}

inline Integer binomial(unsigned long n, unsigned long k) {
  if (k > n) return Integer(0);
  Integer out;
  mpz_bin_uiui(out.get_mpz_t(), n, k);
  return out;
}

// Number of ways to split a set of sum(parts) elements into labelled groups
// of the given sizes.
inline Integer multinomial(const std::vector<uint32_t>& parts) {
  unsigned long total = 0;
  for (uint32_t p : parts) total += p;
  Integer out = factorial(total);
  for (uint32_t p : parts) out /= factorial(p);
  return out;
}

// Parses "3", "-2", "5/7", "1.25" into an exact rational. Decimals convert
// exactly (1.25 -> 5/4); no floating point involved.
inline Rational parse_rational(const std::string& text) {
  std::string s = text;
  if (s.empty()) throw std::invalid_argument("empty number");
  auto dot = s.find('.');
  if (dot != std::string::npos) {
    std::string digits = s.substr(0, dot) + s.substr(dot + 1);
    size_t frac_len = s.size() - dot - 1;
    if (frac_len == 0 || digits.empty()) throw std::invalid_argument("malformed decimal: " + text);
    for (size_t i = 0; i < digits.size(); ++i) {
      char c = digits[i];
      if (!(std::isdigit(static_cast<unsigned char>(c)) || (i == 0 && (c == '-' || c == '+'))))
        throw std::invalid_argument("malformed decimal: " + text);
    }
    // explicit base 10: leading zeros must not trigger octal parsing
    Rational out(Integer(digits, 10), int_pow(Integer(10), frac_len));
    out.canonicalize();
    return out;
  }
  try {
    Rational out(s, 10);
    out.canonicalize();
    return out;
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("malformed number: " + text);
  }
}

inline std::string to_string(const Rational& q) { return q.get_str(); }
inline std::string to_string(const Integer& z) { return z.get_str(); }

}  // namespace wfoms
