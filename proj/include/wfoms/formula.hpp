#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace wfoms {

struct Predicate {
  std::string name;
  uint32_t arity = 0;

  auto operator<=>(const Predicate&) const = default;
};

enum class Connective : uint8_t { And, Or, Implies, Iff };
enum class QuantKind : uint8_t { Forall, Exists, ExistsExactly };
enum class Comparator : uint8_t { Eq, Le, Ge, Lt, Gt };

inline const char* comparator_text(Comparator c) {
  switch (c) {
    case Comparator::Eq: return "=";
    case Comparator::Le: return "<=";
    case Comparator::Ge: return ">=";
    case Comparator::Lt: return "<";
    case Comparator::Gt: return ">";
  }
  return "?";
}

inline bool comparator_holds(Comparator c, int64_t lhs, int64_t rhs) {
  switch (c) {
    case Comparator::Eq: return lhs == rhs;
    case Comparator::Le: return lhs <= rhs;
    case Comparator::Ge: return lhs >= rhs;
    case Comparator::Lt: return lhs < rhs;
    case Comparator::Gt: return lhs > rhs;
  }
  return false;
}

struct Term {
  enum class Kind : uint8_t { Variable, Constant };
  Kind kind = Kind::Variable;
  std::string text;

  static Term var(std::string name) { return {Kind::Variable, std::move(name)}; }
  static Term constant(std::string label) { return {Kind::Constant, std::move(label)}; }
  bool is_variable() const { return kind == Kind::Variable; }
  auto operator<=>(const Term&) const = default;
};

class Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

// Immutable AST node for FO2 with counting quantifiers and cardinality atoms.
class Formula {
 public:
  enum class Kind : uint8_t { Atom, Not, Binary, Quantified, CardinalityAtom, BoolConst };

  Kind kind;

  // Atom / CardinalityAtom
  std::string predicate;
  std::vector<Term> args;

  // Binary
  Connective op = Connective::And;

  // Not: children[0]; Binary: children[0], children[1]; Quantified: children[0]
  std::vector<FormulaPtr> children;

  // Quantified
  QuantKind quant = QuantKind::Forall;
  std::string var;
  uint32_t count_k = 0;

  // CardinalityAtom
  Comparator cmp = Comparator::Eq;
  int64_t threshold = 0;

  // BoolConst
  bool value = false;

  static FormulaPtr atom(std::string pred, std::vector<Term> terms = {}) {
    auto f = std::make_shared<Formula>();
    f->kind = Kind::Atom;
    f->predicate = std::move(pred);
    f->args = std::move(terms);
    return f;
  }

  static FormulaPtr negate(FormulaPtr inner) {
    auto f = std::make_shared<Formula>();
    f->kind = Kind::Not;
    f->children = {std::move(inner)};
    return f;
  }

  static FormulaPtr binary(Connective c, FormulaPtr lhs, FormulaPtr rhs) {
    auto f = std::make_shared<Formula>();
    f->kind = Kind::Binary;
    f->op = c;
    f->children = {std::move(lhs), std::move(rhs)};
    return f;
  }

  static FormulaPtr conj(FormulaPtr a, FormulaPtr b) { return binary(Connective::And, std::move(a), std::move(b)); }
  static FormulaPtr disj(FormulaPtr a, FormulaPtr b) { return binary(Connective::Or, std::move(a), std::move(b)); }
  static FormulaPtr implies(FormulaPtr a, FormulaPtr b) { return binary(Connective::Implies, std::move(a), std::move(b)); }
  static FormulaPtr iff(FormulaPtr a, FormulaPtr b) { return binary(Connective::Iff, std::move(a), std::move(b)); }

  static FormulaPtr quantified(QuantKind q, std::string v, FormulaPtr body, uint32_t k = 0) {
    auto f = std::make_shared<Formula>();
    f->kind = Kind::Quantified;
    f->quant = q;
    f->var = std::move(v);
    f->count_k = k;
    f->children = {std::move(body)};
    return f;
  }

  static FormulaPtr forall(std::string v, FormulaPtr body) {
    return quantified(QuantKind::Forall, std::move(v), std::move(body));
  }
  static FormulaPtr exists(std::string v, FormulaPtr body) {
    return quantified(QuantKind::Exists, std::move(v), std::move(body));
  }
  static FormulaPtr exists_exactly(uint32_t k, std::string v, FormulaPtr body) {
    return quantified(QuantKind::ExistsExactly, std::move(v), std::move(body), k);
  }

  static FormulaPtr cardinality(std::string pred, Comparator c, int64_t q) {
    auto f = std::make_shared<Formula>();
    f->kind = Kind::CardinalityAtom;
    f->predicate = std::move(pred);
    f->cmp = c;
    f->threshold = q;
    return f;
  }

  static FormulaPtr boolean(bool v) {
    auto f = std::make_shared<Formula>();
    f->kind = Kind::BoolConst;
    f->value = v;
    return f;
  }
};

// Conjoins a list, folding left; empty list is true.
inline FormulaPtr conjoin_all(const std::vector<FormulaPtr>& parts) {
  if (parts.empty()) return Formula::boolean(true);
  FormulaPtr out = parts.front();
  for (size_t i = 1; i < parts.size(); ++i) out = Formula::conj(out, parts[i]);
  return out;
}

inline void split_conjuncts(const FormulaPtr& f, std::vector<FormulaPtr>& out) {
  if (f->kind == Formula::Kind::Binary && f->op == Connective::And) {
    split_conjuncts(f->children[0], out);
    split_conjuncts(f->children[1], out);
  } else {
    out.push_back(f);
  }
}

inline std::vector<FormulaPtr> top_level_conjuncts(const FormulaPtr& f) {
  std::vector<FormulaPtr> out;
  split_conjuncts(f, out);
  return out;
}

inline void collect_free_variables(const FormulaPtr& f, std::set<std::string>& bound,
                                   std::set<std::string>& out) {
  switch (f->kind) {
    case Formula::Kind::Atom:
      for (const auto& t : f->args)
        if (t.is_variable() && !bound.count(t.text)) out.insert(t.text);
      break;
    case Formula::Kind::Quantified: {
      bool fresh = bound.insert(f->var).second;
      collect_free_variables(f->children[0], bound, out);
      if (fresh) bound.erase(f->var);
      break;
    }
    default:
      for (const auto& c : f->children) collect_free_variables(c, bound, out);
      break;
  }
}

inline std::set<std::string> free_variables(const FormulaPtr& f) {
  std::set<std::string> bound, out;
  collect_free_variables(f, bound, out);
  return out;
}

// Gathers predicate name -> arity; throws on inconsistent arities.
inline void collect_predicates(const FormulaPtr& f, std::map<std::string, uint32_t>& out) {
  if (f->kind == Formula::Kind::Atom) {
    auto arity = static_cast<uint32_t>(f->args.size());
    auto [it, inserted] = out.emplace(f->predicate, arity);
    if (!inserted && it->second != arity)
      throw std::invalid_argument("predicate " + f->predicate + " used with inconsistent arity");
  } else if (f->kind == Formula::Kind::CardinalityAtom) {
    out.emplace(f->predicate, 0);  // arity unknown here; caller reconciles
  }
  for (const auto& c : f->children) collect_predicates(c, out);
}

inline bool contains_counting_quantifier(const FormulaPtr& f) {
  if (f->kind == Formula::Kind::Quantified && f->quant == QuantKind::ExistsExactly) return true;
  for (const auto& c : f->children)
    if (contains_counting_quantifier(c)) return true;
  return false;
}

inline bool contains_quantifier(const FormulaPtr& f) {
  if (f->kind == Formula::Kind::Quantified) return true;
  for (const auto& c : f->children)
    if (contains_quantifier(c)) return true;
  return false;
}

inline bool contains_cardinality_atom(const FormulaPtr& f) {
  if (f->kind == Formula::Kind::CardinalityAtom) return true;
  for (const auto& c : f->children)
    if (contains_cardinality_atom(c)) return true;
  return false;
}

inline bool contains_ground_atom(const FormulaPtr& f) {
  if (f->kind == Formula::Kind::Atom)
    for (const auto& t : f->args)
      if (!t.is_variable()) return true;
  for (const auto& c : f->children)
    if (contains_ground_atom(c)) return true;
  return false;
}

// Replaces variable occurrences according to the map (used to canonicalize
// x/y orientation); quantified subformulas shadow as usual.
inline FormulaPtr rename_variables(const FormulaPtr& f, const std::map<std::string, std::string>& ren) {
  switch (f->kind) {
    case Formula::Kind::Atom: {
      std::vector<Term> args = f->args;
      for (auto& t : args)
        if (t.is_variable()) {
          auto it = ren.find(t.text);
          if (it != ren.end()) t.text = it->second;
        }
      return Formula::atom(f->predicate, std::move(args));
    }
    case Formula::Kind::Not:
      return Formula::negate(rename_variables(f->children[0], ren));
    case Formula::Kind::Binary:
      return Formula::binary(f->op, rename_variables(f->children[0], ren),
                             rename_variables(f->children[1], ren));
    case Formula::Kind::Quantified: {
      auto inner = ren;
      inner.erase(f->var);
      return Formula::quantified(f->quant, f->var, rename_variables(f->children[0], inner), f->count_k);
    }
    default:
      return f;
  }
}

inline std::string render_term(const Term& t) { return t.text; }

inline int precedence(const FormulaPtr& f) {
  switch (f->kind) {
    case Formula::Kind::Binary:
      switch (f->op) {
        case Connective::And: return 4;
        case Connective::Or: return 3;
        case Connective::Implies: return 2;
        case Connective::Iff: return 1;
      }
      return 0;
    case Formula::Kind::Quantified: return 0;
    default: return 5;
  }
}

// Renders in the problem-file syntax; parenthesized per operator precedence
// so that parse(render(f)) reproduces the tree shape.
inline std::string render_formula(const FormulaPtr& f) {
  std::ostringstream os;
  auto child = [&](const FormulaPtr& c, bool strict) {
    bool paren = precedence(c) < precedence(f) || (strict && precedence(c) == precedence(f));
    return paren ? "(" + render_formula(c) + ")" : render_formula(c);
  };
  switch (f->kind) {
    case Formula::Kind::Atom: {
      os << f->predicate << "(";
      for (size_t i = 0; i < f->args.size(); ++i) {
        if (i) os << ",";
        os << render_term(f->args[i]);
      }
      os << ")";
      break;
    }
    case Formula::Kind::Not: {
      const auto& c = f->children[0];
      bool paren = precedence(c) < 5;
      os << "~" << (paren ? "(" + render_formula(c) + ")" : render_formula(c));
      break;
    }
    case Formula::Kind::Binary: {
      const char* sym = f->op == Connective::And   ? " & "
                        : f->op == Connective::Or  ? " | "
                        : f->op == Connective::Implies ? " -> "
                                                       : " <-> ";
      // & and | parse left-associative, -> and <-> right-associative
      bool right_assoc = f->op == Connective::Implies || f->op == Connective::Iff;
      os << child(f->children[0], right_assoc) << sym << child(f->children[1], !right_assoc);
      break;
    }
    case Formula::Kind::Quantified: {
      if (f->quant == QuantKind::Forall)
        os << "forall " << f->var;
      else if (f->quant == QuantKind::Exists)
        os << "exists " << f->var;
      else
        os << "exists_{=" << f->count_k << "} " << f->var;
      os << ": " << render_formula(f->children[0]);
      break;
    }
    case Formula::Kind::CardinalityAtom:
      os << "|" << f->predicate << "| " << comparator_text(f->cmp) << " " << f->threshold;
      break;
    case Formula::Kind::BoolConst:
      os << (f->value ? "true" : "false");
      break;
  }
  return os.str();
}

}  // namespace wfoms
