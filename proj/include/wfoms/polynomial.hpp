#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "wfoms/rational.hpp"

namespace wfoms {

// Sparse multivariate polynomial with exact rational coefficients, one
// variable per cardinality-tracked predicate. Exponent vectors all share the
// same length (the number of tracked predicates, possibly 0, in which case a
// polynomial is just a scalar).
class SymbolicWeight {
 public:
  using Exponents = std::vector<uint32_t>;

  SymbolicWeight() = default;

  static SymbolicWeight zero(size_t vars) {
    SymbolicWeight p;
    p.vars_ = vars;
    return p;
  }

  static SymbolicWeight constant(size_t vars, Rational value) {
    SymbolicWeight p;
    p.vars_ = vars;
    if (value != 0) p.terms_.emplace(Exponents(vars, 0), std::move(value));
    return p;
  }

  // coeff * prod_i x_i^{exps_i}
  static SymbolicWeight monomial(Exponents exps, Rational coeff) {
    SymbolicWeight p;
    p.vars_ = exps.size();
    if (coeff != 0) p.terms_.emplace(std::move(exps), std::move(coeff));
    return p;
  }

  size_t variables() const { return vars_; }
  bool is_zero() const { return terms_.empty(); }
  size_t term_count() const { return terms_.size(); }
  const std::map<Exponents, Rational>& terms() const { return terms_; }

  SymbolicWeight& operator+=(const SymbolicWeight& other) {
    for (const auto& [e, c] : other.terms_) add_term(e, c);
    return *this;
  }

  SymbolicWeight operator+(const SymbolicWeight& other) const {
    SymbolicWeight out = *this;
    out += other;
    return out;
  }

  SymbolicWeight operator*(const SymbolicWeight& other) const {
    SymbolicWeight out = zero(vars_);
    if (is_zero() || other.is_zero()) return out;
    Exponents e(vars_);
    for (const auto& [ea, ca] : terms_) {
      for (const auto& [eb, cb] : other.terms_) {
        for (size_t i = 0; i < vars_; ++i) e[i] = ea[i] + eb[i];
        out.add_term(e, ca * cb);
      }
    }
    return out;
  }

  SymbolicWeight& operator*=(const SymbolicWeight& other) {
    *this = *this * other;
    return *this;
  }

  SymbolicWeight& operator*=(const Rational& s) {
    if (s == 0) {
      terms_.clear();
      return *this;
    }
    for (auto& [e, c] : terms_) c *= s;
    return *this;
  }

  SymbolicWeight pow(unsigned long e) const {
    if (e == 0) return constant(vars_, 1);
    if (terms_.size() == 1) {  // monomial fast path
      const auto& [exps, coeff] = *terms_.begin();
      Exponents out(vars_);
      for (size_t i = 0; i < vars_; ++i) out[i] = exps[i] * static_cast<uint32_t>(e);
      return monomial(std::move(out), rat_pow(coeff, e));
    }
    SymbolicWeight acc = constant(vars_, 1);
    SymbolicWeight base = *this;
    while (e > 0) {
      if (e & 1) acc = acc * base;
      e >>= 1;
      if (e > 0) base = base * base;
    }
    return acc;
  }

  // Substitutes a value per variable; the evaluation homomorphism.
  Rational evaluate(const std::vector<Rational>& values) const {
    Rational out(0);
    for (const auto& [e, c] : terms_) {
      Rational t = c;
      for (size_t i = 0; i < vars_; ++i)
        if (e[i] > 0) t *= rat_pow(values[i], e[i]);
      out += t;
    }
    return out;
  }

  // Sums coeff * prod values_i^{e_i} over the terms whose exponent vector the
  // predicate accepts.
  template <typename Pred>
  Rational filtered_sum(const std::vector<Rational>& values, Pred&& accept) const {
    Rational out(0);
    for (const auto& [e, c] : terms_) {
      if (!accept(e)) continue;
      Rational t = c;
      for (size_t i = 0; i < vars_; ++i)
        if (e[i] > 0) t *= rat_pow(values[i], e[i]);
      out += t;
    }
    return out;
  }

  bool operator==(const SymbolicWeight& other) const {
    return vars_ == other.vars_ && terms_ == other.terms_;
  }

 private:
  void add_term(const Exponents& e, const Rational& c) {
    auto it = terms_.find(e);
    if (it == terms_.end()) {
      if (c != 0) terms_.emplace(e, c);
      return;
    }
    it->second += c;
    if (it->second == 0) terms_.erase(it);
  }

  size_t vars_ = 0;
  std::map<Exponents, Rational> terms_;
};

}  // namespace wfoms
