#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "wfoms/formula.hpp"
#include "wfoms/rational.hpp"

namespace wfoms {

// Finite ordered domain; order is fixed for the lifetime of a problem.
class Domain {
 public:
  Domain() = default;

  explicit Domain(std::vector<std::string> labels) : labels_(std::move(labels)) {
    for (uint32_t i = 0; i < labels_.size(); ++i) {
      if (!index_.emplace(labels_[i], i).second)
        throw std::invalid_argument("duplicate domain element: " + labels_[i]);
    }
  }

  static Domain of_size(uint32_t n) {
    std::vector<std::string> labels;
    labels.reserve(n);
    for (uint32_t i = 1; i <= n; ++i) labels.push_back(std::to_string(i));
    return Domain(std::move(labels));
  }

  uint32_t size() const { return static_cast<uint32_t>(labels_.size()); }
  const std::string& label(uint32_t i) const { return labels_.at(i); }
  const std::vector<std::string>& labels() const { return labels_; }

  uint32_t index_of(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) throw std::invalid_argument("unknown domain element: " + label);
    return it->second;
  }

  bool contains(const std::string& label) const { return index_.count(label) > 0; }

 private:
  std::vector<std::string> labels_;
  std::map<std::string, uint32_t> index_;
};

struct GroundAtom {
  std::string predicate;
  std::vector<uint32_t> args;  // domain element indices

  auto operator<=>(const GroundAtom&) const = default;
};

// A finite set of true ground atoms; absent atoms are false.
class Structure {
 public:
  Structure() = default;
  explicit Structure(Domain domain) : domain_(std::move(domain)) {}

  const Domain& domain() const { return domain_; }
  const std::set<GroundAtom>& atoms() const { return atoms_; }

  void insert(GroundAtom atom) { atoms_.insert(std::move(atom)); }
  void insert(const std::string& pred, std::vector<uint32_t> args) {
    atoms_.insert(GroundAtom{pred, std::move(args)});
  }
  bool holds(const GroundAtom& atom) const { return atoms_.count(atom) > 0; }
  bool holds(const std::string& pred, const std::vector<uint32_t>& args) const {
    return atoms_.count(GroundAtom{pred, args}) > 0;
  }

  size_t count_true(const std::string& pred) const {
    size_t n = 0;
    for (const auto& a : atoms_)
      if (a.predicate == pred) ++n;
    return n;
  }

  // Keeps only atoms of the given predicates.
  Structure project(const std::set<std::string>& preds) const {
    Structure out(domain_);
    for (const auto& a : atoms_)
      if (preds.count(a.predicate)) out.atoms_.insert(a);
    return out;
  }

  std::string render_atom(const GroundAtom& a) const {
    std::string s = a.predicate + "(";
    for (size_t i = 0; i < a.args.size(); ++i) {
      if (i) s += ",";
      s += domain_.label(a.args[i]);
    }
    s += ")";
    return s;
  }

  // Canonical encoding: sorted positive atoms separated by spaces.
  std::string canonical_text() const {
    std::ostringstream os;
    bool first = true;
    for (const auto& a : atoms_) {
      if (!first) os << " ";
      first = false;
      os << render_atom(a);
    }
    return os.str();
  }

  bool operator==(const Structure& other) const { return atoms_ == other.atoms_; }
  bool operator<(const Structure& other) const { return atoms_ < other.atoms_; }

 private:
  Domain domain_;
  std::set<GroundAtom> atoms_;
};

// Per-predicate weight pair (w, wbar); values must be nonnegative so sampling
// probabilities stay well-defined.
class WeightMap {
 public:
  void set(const std::string& pred, Rational w, Rational wbar) {
    w.canonicalize();
    wbar.canonicalize();
    if (w < 0 || wbar < 0) throw std::invalid_argument("negative weight for " + pred);
    weights_[pred] = {std::move(w), std::move(wbar)};
  }

  bool has(const std::string& pred) const { return weights_.count(pred) > 0; }

  const Rational& positive(const std::string& pred) const { return lookup(pred).first; }
  const Rational& negative(const std::string& pred) const { return lookup(pred).second; }

  void ensure_default(const std::string& pred) {
    weights_.try_emplace(pred, Rational(1), Rational(1));
  }

  const std::map<std::string, std::pair<Rational, Rational>>& entries() const { return weights_; }

 private:
  const std::pair<Rational, Rational>& lookup(const std::string& pred) const {
    auto it = weights_.find(pred);
    if (it == weights_.end()) throw std::invalid_argument("no weight entry for predicate " + pred);
    return it->second;
  }

  std::map<std::string, std::pair<Rational, Rational>> weights_;
};

// Product of w(pred) over true literals and wbar(pred) over false literals.
// `truths` pairs each ground atom with its polarity.
inline Rational literal_set_weight(const std::vector<std::pair<GroundAtom, bool>>& truths,
                                   const WeightMap& weights) {
  Rational out(1);
  for (const auto& [atom, positive] : truths)
    out *= positive ? weights.positive(atom.predicate) : weights.negative(atom.predicate);
  return out;
}

// Weight of a full structure: every ground atom of every predicate in `vocab`
// contributes, true atoms with w and the implicit false remainder with wbar.
inline Rational structure_weight(const Structure& s, const std::vector<Predicate>& vocab,
                                 const WeightMap& weights) {
  Rational out(1);
  uint64_t n = s.domain().size();
  for (const auto& p : vocab) {
    uint64_t total = 1;
    for (uint32_t i = 0; i < p.arity; ++i) total *= n;
    uint64_t pos = 0;
    for (const auto& a : s.atoms())
      if (a.predicate == p.name) ++pos;
    out *= rat_pow(weights.positive(p.name), pos);
    out *= rat_pow(weights.negative(p.name), total - pos);
  }
  return out;
}

}  // namespace wfoms
