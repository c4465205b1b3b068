#pragma once

#include <map>
#include <stdexcept>
#include <string>

#include "wfoms/formula.hpp"
#include "wfoms/structure.hpp"

namespace wfoms {

namespace detail {

inline bool eval_rec(const FormulaPtr& f, const Structure& s,
                     std::map<std::string, uint32_t>& binding) {
  switch (f->kind) {
    case Formula::Kind::Atom: {
      GroundAtom atom{f->predicate, {}};
      atom.args.reserve(f->args.size());
      for (const auto& t : f->args) {
        if (t.is_variable()) {
          auto it = binding.find(t.text);
          if (it == binding.end()) throw std::invalid_argument("unbound variable " + t.text);
          atom.args.push_back(it->second);
        } else {
          atom.args.push_back(s.domain().index_of(t.text));
        }
      }
      return s.holds(atom);
    }
    case Formula::Kind::Not:
      return !eval_rec(f->children[0], s, binding);
    case Formula::Kind::Binary: {
      bool a = eval_rec(f->children[0], s, binding);
      switch (f->op) {
        case Connective::And: return a && eval_rec(f->children[1], s, binding);
        case Connective::Or: return a || eval_rec(f->children[1], s, binding);
        case Connective::Implies: return !a || eval_rec(f->children[1], s, binding);
        case Connective::Iff: return a == eval_rec(f->children[1], s, binding);
      }
      return false;
    }
    case Formula::Kind::Quantified: {
      auto saved = binding.find(f->var);
      bool had = saved != binding.end();
      uint32_t old = had ? saved->second : 0;
      uint32_t hits = 0;
      bool result;
      if (f->quant == QuantKind::Forall) {
        result = true;
        for (uint32_t e = 0; e < s.domain().size(); ++e) {
          binding[f->var] = e;
          if (!eval_rec(f->children[0], s, binding)) {
            result = false;
            break;
          }
        }
      } else if (f->quant == QuantKind::Exists) {
        result = false;
        for (uint32_t e = 0; e < s.domain().size(); ++e) {
          binding[f->var] = e;
          if (eval_rec(f->children[0], s, binding)) {
            result = true;
            break;
          }
        }
      } else {  // exact witness counting
        for (uint32_t e = 0; e < s.domain().size(); ++e) {
          binding[f->var] = e;
          if (eval_rec(f->children[0], s, binding)) ++hits;
        }
        result = hits == f->count_k;
      }
      if (had)
        binding[f->var] = old;
      else
        binding.erase(f->var);
      return result;
    }
    case Formula::Kind::CardinalityAtom:
      return comparator_holds(f->cmp, static_cast<int64_t>(s.count_true(f->predicate)), f->threshold);
    case Formula::Kind::BoolConst:
      return f->value;
  }
  return false;
}

}  // namespace detail

// Model check with standard first-order semantics; cardinality atoms count
// true ground atoms and counting quantifiers count witnesses exactly.
inline bool evaluate(const FormulaPtr& sentence, const Structure& s) {
  std::map<std::string, uint32_t> binding;
  return detail::eval_rec(sentence, s, binding);
}

}  // namespace wfoms
