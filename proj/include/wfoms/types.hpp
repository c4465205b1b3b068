#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wfoms/formula.hpp"

namespace wfoms {

// P(x) for unary P, or the reflexive R(x,x) for binary R.
struct OneLiteral {
  std::string pred;
  bool reflexive = false;

  auto operator<=>(const OneLiteral&) const = default;
};

// R(x,y) (forward) or R(y,x) (backward) for binary R.
struct TwoLiteral {
  std::string pred;
  bool forward = true;

  auto operator<=>(const TwoLiteral&) const = default;
};

using OneTypeId = uint32_t;
using TwoTableId = uint32_t;
using BlockMask = uint32_t;  // bit k set = Tseitin obligation Z_k still open

struct CellType {
  BlockMask block = 0;
  OneTypeId one_type = 0;

  auto operator<=>(const CellType&) const = default;
};

// Canonical orders for 1-literals, 2-literals, 1-types and 2-tables over a
// vocabulary. Types are identified with their lexicographic rank: literal 0
// is the most significant position, false < true.
class TypeSpace {
 public:
  TypeSpace() = default;

  explicit TypeSpace(const std::vector<Predicate>& vocab) {
    std::vector<Predicate> sorted = vocab;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& p : sorted) {
      if (p.arity == 1) one_literals_.push_back({p.name, false});
      else if (p.arity == 2) {
        one_literals_.push_back({p.name, true});
        two_literals_.push_back({p.name, true});
        two_literals_.push_back({p.name, false});
        binary_preds_.push_back(p.name);
      } else if (p.arity == 0) {
        nullary_preds_.push_back(p.name);
      } else {
        throw std::invalid_argument("predicate arity above 2: " + p.name);
      }
    }
    std::sort(one_literals_.begin(), one_literals_.end());
    if (one_literals_.size() > 20)
      throw std::invalid_argument("vocabulary too large: " + std::to_string(one_literals_.size()) +
                                  " 1-literals");
  }

  const std::vector<OneLiteral>& one_literals() const { return one_literals_; }
  const std::vector<TwoLiteral>& two_literals() const { return two_literals_; }
  const std::vector<std::string>& binary_predicates() const { return binary_preds_; }
  const std::vector<std::string>& nullary_predicates() const { return nullary_preds_; }

  size_t num_one_types() const { return size_t(1) << one_literals_.size(); }
  size_t num_two_tables() const { return size_t(1) << two_literals_.size(); }

  bool one_truth(OneTypeId type, size_t literal) const {
    size_t L = one_literals_.size();
    return (type >> (L - 1 - literal)) & 1u;
  }

  bool two_truth(TwoTableId table, size_t literal) const {
    size_t L = two_literals_.size();
    return (table >> (L - 1 - literal)) & 1u;
  }

  int one_literal_index(const std::string& pred, bool reflexive) const {
    OneLiteral key{pred, reflexive};
    auto it = std::lower_bound(one_literals_.begin(), one_literals_.end(), key);
    if (it == one_literals_.end() || !(*it == key)) return -1;
    return static_cast<int>(it - one_literals_.begin());
  }

  int two_literal_index(const std::string& pred, bool forward) const {
    for (size_t i = 0; i < two_literals_.size(); ++i)
      if (two_literals_[i].pred == pred && two_literals_[i].forward == forward)
        return static_cast<int>(i);
    return -1;
  }

  // The 1-literal describing pred at a single element: P(x) when unary,
  // R(x,x) when binary.
  int self_literal_index(const std::string& pred) const {
    int idx = one_literal_index(pred, false);
    if (idx >= 0) return idx;
    return one_literal_index(pred, true);
  }

  // Truth of pred(x,x) in the 1-type, or pred(x) for unary.
  bool one_type_holds(OneTypeId type, const std::string& pred, bool reflexive) const {
    int idx = one_literal_index(pred, reflexive);
    if (idx < 0) throw std::invalid_argument("unknown 1-literal for " + pred);
    return one_truth(type, static_cast<size_t>(idx));
  }

  bool table_holds(TwoTableId table, const std::string& pred, bool forward) const {
    int idx = two_literal_index(pred, forward);
    if (idx < 0) throw std::invalid_argument("unknown 2-literal for " + pred);
    return two_truth(table, static_cast<size_t>(idx));
  }

  // The mirrored table: swaps R(x,y) and R(y,x) truth values.
  TwoTableId mirror(TwoTableId table) const {
    TwoTableId out = 0;
    size_t L = two_literals_.size();
    for (size_t i = 0; i < L; ++i) {
      // literals come in (forward, backward) adjacent pairs per predicate
      size_t partner = (i % 2 == 0) ? i + 1 : i - 1;
      if (two_truth(table, partner)) out |= (TwoTableId(1) << (L - 1 - i));
    }
    return out;
  }

 private:
  std::vector<OneLiteral> one_literals_;
  std::vector<TwoLiteral> two_literals_;
  std::vector<std::string> binary_preds_;
  std::vector<std::string> nullary_preds_;
};

inline std::vector<OneTypeId> enumerate_one_types(const TypeSpace& space) {
  std::vector<OneTypeId> out(space.num_one_types());
  for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<OneTypeId>(i);
  return out;
}

inline std::vector<TwoTableId> enumerate_two_tables(const TypeSpace& space) {
  std::vector<TwoTableId> out(space.num_two_tables());
  for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<TwoTableId>(i);
  return out;
}

// Evaluates a quantifier-free formula over {x,y} against explicit atom
// truths. `nullary` resolves arity-0 atoms.
template <typename AtomFn, typename NullFn>
inline bool eval_quantifier_free(const FormulaPtr& f, AtomFn&& atom_truth, NullFn&& nullary) {
  switch (f->kind) {
    case Formula::Kind::Atom: {
      if (f->args.empty()) return nullary(f->predicate);
      for (const auto& t : f->args)
        if (!t.is_variable())
          throw std::invalid_argument("ground atom in quantifier-free matrix");
      if (f->args.size() == 1) return atom_truth(f->predicate, f->args[0].text, f->args[0].text);
      return atom_truth(f->predicate, f->args[0].text, f->args[1].text);
    }
    case Formula::Kind::Not:
      return !eval_quantifier_free(f->children[0], atom_truth, nullary);
    case Formula::Kind::Binary: {
      bool a = eval_quantifier_free(f->children[0], atom_truth, nullary);
      bool b = eval_quantifier_free(f->children[1], atom_truth, nullary);
      switch (f->op) {
        case Connective::And: return a && b;
        case Connective::Or: return a || b;
        case Connective::Implies: return !a || b;
        case Connective::Iff: return a == b;
      }
      return false;
    }
    case Formula::Kind::BoolConst:
      return f->value;
    default:
      throw std::invalid_argument("matrix must be quantifier-free");
  }
}

// Truth of the matrix at (a,b) where a realizes tau_a (as x), b realizes
// tau_b (as y), and the pair realizes table pi.
inline bool matrix_holds_pair(const FormulaPtr& matrix, const TypeSpace& space, OneTypeId tau_a,
                              OneTypeId tau_b, TwoTableId pi,
                              const std::function<bool(const std::string&)>& nullary) {
  auto atom_truth = [&](const std::string& pred, const std::string& u, const std::string& v) {
    if (u == v) {  // unary P(u) or reflexive R(u,u)
      OneTypeId tau = (u == "x") ? tau_a : tau_b;
      int idx = space.self_literal_index(pred);
      if (idx < 0) throw std::invalid_argument("unknown predicate " + pred);
      return space.one_truth(tau, static_cast<size_t>(idx));
    }
    return space.table_holds(pi, pred, u == "x");
  };
  return eval_quantifier_free(matrix, atom_truth, nullary);
}

// tau satisfies psi(x,x): a 1-type is realizable only if its self-pair holds.
inline bool valid_one_type(const FormulaPtr& matrix, const TypeSpace& space, OneTypeId tau,
                           const std::function<bool(const std::string&)>& nullary) {
  auto atom_truth = [&](const std::string& pred, const std::string&, const std::string&) {
    int idx = space.self_literal_index(pred);
    if (idx < 0) throw std::invalid_argument("unknown predicate " + pred);
    return space.one_truth(tau, static_cast<size_t>(idx));
  };
  return eval_quantifier_free(matrix, atom_truth, nullary);
}

// pi is coherent with (tau, tau2) iff tau(a), tau2(b), pi(a,b) jointly satisfy
// psi(a,b) and psi(b,a).
inline bool coherent(const FormulaPtr& matrix, const TypeSpace& space, OneTypeId tau, OneTypeId tau2,
                     TwoTableId pi, const std::function<bool(const std::string&)>& nullary) {
  return matrix_holds_pair(matrix, space, tau, tau2, pi, nullary) &&
         matrix_holds_pair(matrix, space, tau2, tau, space.mirror(pi), nullary);
}

// Removes from the block every obligation Z_k already witnessed by pi, where
// pi describes the pair (e_t as x, relaxed element as y): a witness for the
// relaxed element is R_k(y,x).
inline CellType relax(const TypeSpace& space, CellType cell, TwoTableId pi,
                      const std::vector<std::string>& exist_preds) {
  BlockMask out = cell.block;
  for (size_t k = 0; k < exist_preds.size(); ++k) {
    if (!(out & (BlockMask(1) << k))) continue;
    if (space.table_holds(pi, exist_preds[k], /*forward=*/false)) out &= ~(BlockMask(1) << k);
  }
  return {out, cell.one_type};
}

}  // namespace wfoms
