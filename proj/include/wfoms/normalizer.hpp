#pragma once

#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "wfoms/formula.hpp"
#include "wfoms/parser.hpp"
#include "wfoms/structure.hpp"
#include "wfoms/types.hpp"

namespace wfoms {

struct NormalizeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ReductionStep {
  std::string introduced;
  FormulaPtr definition;  // the axiom that pins the fresh predicate down
  Integer fiber = 1;      // reduced models per source model
};

// Record of every sound reduction applied on the way to the general problem.
struct ReductionTrace {
  std::vector<ReductionStep> steps;
  std::vector<Predicate> skeleton;  // the user vocabulary models project onto
  Integer fiber_multiplicity = 1;

  void add(std::string pred, FormulaPtr definition, Integer fiber = 1) {
    fiber_multiplicity *= fiber;
    steps.push_back({std::move(pred), std::move(definition), std::move(fiber)});
  }
};

// Scott normal form: a universally quantified matrix plus forall-exists
// conjunct bodies.
struct SnfSentence {
  FormulaPtr matrix;                     // psi(x,y), quantifier-free
  std::vector<FormulaPtr> exist_bodies;  // phi_k(x,y), quantifier-free
};

// The sampler's working form: Gamma_T with per-element existential
// obligations tracked as block masks (Tseitin predicates stay implicit).
struct GeneralProblem {
  FormulaPtr matrix;
  std::vector<std::string> exist_preds;  // binary R_k, one per obligation Z_k
  std::vector<Predicate> vocabulary;     // all predicates of the matrix
  WeightMap weights;
  Domain domain;
  std::vector<BlockMask> blocks;  // per domain element
  FormulaPtr constraints;         // Upsilon; boolean(true) when absent
  ReductionTrace trace;

  BlockMask full_block() const {
    return exist_preds.empty() ? 0 : static_cast<BlockMask>((uint64_t(1) << exist_preds.size()) - 1);
  }
};

namespace detail {

class FreshNames {
 public:
  std::string next(const std::string& stem) { return "__" + stem + std::to_string(++counters_[stem]); }

 private:
  std::map<std::string, int> counters_;
};

// Rebuilds the tree with `target` (by node identity) replaced.
inline FormulaPtr substitute_node(const FormulaPtr& f, const FormulaPtr& target,
                                  const FormulaPtr& replacement) {
  if (f == target) return replacement;
  if (f->children.empty()) return f;
  auto copy = std::make_shared<Formula>(*f);
  bool changed = false;
  for (auto& c : copy->children) {
    auto next = substitute_node(c, target, replacement);
    if (next != c) changed = true;
    c = next;
  }
  return changed ? FormulaPtr(copy) : f;
}

// Finds a quantified node whose body is quantifier-free (deepest first).
inline FormulaPtr find_innermost_quantified(const FormulaPtr& f) {
  for (const auto& c : f->children) {
    auto found = find_innermost_quantified(c);
    if (found) return found;
  }
  if (f->kind == Formula::Kind::Quantified && !contains_quantifier(f->children[0])) return f;
  return nullptr;
}

inline std::map<std::string, std::string> orient(const std::string& outer, const std::string& inner) {
  return {{outer, "x"}, {inner, "y"}};
}

}  // namespace detail

struct SnfResult {
  SnfSentence snf;
  WeightMap weights;
  std::vector<ReductionStep> steps;
};

// Scott normal form via bottom-up subformula replacement: each innermost
// Qy-subformula becomes a fresh unary (or nullary) atom with unit weights,
// axiomatized in both directions. Sound, and independent of the domain.
inline SnfResult to_snf(const FormulaPtr& sentence, const WeightMap& weights,
                        detail::FreshNames& fresh) {
  if (contains_counting_quantifier(sentence))
    throw NormalizeError("counting quantifiers must be reduced before the SNF transform");
  if (contains_cardinality_atom(sentence))
    throw NormalizeError("cardinality atoms cannot appear inside the sentence here");
  if (contains_ground_atom(sentence))
    throw NormalizeError("ground atoms are not supported by the lifted pipeline");

  SnfResult out;
  out.weights = weights;
  std::vector<FormulaPtr> queue = top_level_conjuncts(sentence);
  std::vector<FormulaPtr> matrix_parts;

  auto introduce = [&](const FormulaPtr& conjunct) {
    // replace one innermost quantified subformula by a fresh atom
    FormulaPtr target = detail::find_innermost_quantified(conjunct);
    if (!target) throw NormalizeError("cannot normalize conjunct: " + render_formula(conjunct));
    FormulaPtr body = target->children[0];
    std::set<std::string> fv = free_variables(target);
    if (fv.size() > 1) throw NormalizeError("subformula with two free variables under a quantifier");
    std::string name = fresh.next("A");
    FormulaPtr aux_atom =
        fv.empty() ? Formula::atom(name)
                   : Formula::atom(name, {Term::var(*fv.begin())});
    // canonical orientation: free variable as x, quantified variable as y
    std::string outer = fv.empty() ? (target->var == "x" ? "y" : "x") : *fv.begin();
    auto ren = detail::orient(outer, target->var);
    FormulaPtr phi = rename_variables(body, ren);
    FormulaPtr aux_x = fv.empty() ? Formula::atom(name) : Formula::atom(name, {Term::var("x")});
    if (target->quant == QuantKind::Exists) {
      matrix_parts.push_back(Formula::implies(phi, aux_x));                 // forall-forall direction
      out.snf.exist_bodies.push_back(Formula::disj(Formula::negate(aux_x), phi));  // dual of Q
    } else {
      matrix_parts.push_back(Formula::implies(aux_x, phi));
      out.snf.exist_bodies.push_back(Formula::disj(Formula::negate(phi), aux_x));
    }
    out.weights.set(name, 1, 1);
    out.steps.push_back({name, Formula::iff(aux_x, target), 1});
    queue.push_back(detail::substitute_node(conjunct, target, aux_atom));
  };

  while (!queue.empty()) {
    FormulaPtr c = queue.back();
    queue.pop_back();
    if (!contains_quantifier(c)) {
      if (!free_variables(c).empty())
        throw NormalizeError("free variables in conjunct: " + render_formula(c));
      matrix_parts.push_back(c);
      continue;
    }
    if (c->kind == Formula::Kind::Quantified) {
      const FormulaPtr& body = c->children[0];
      // vacuous quantifier (including shadowing)
      if (!free_variables(body).count(c->var) && c->quant != QuantKind::ExistsExactly) {
        queue.push_back(body);
        continue;
      }
      if (c->quant == QuantKind::Forall) {
        if (!contains_quantifier(body)) {
          matrix_parts.push_back(rename_variables(body, {{c->var, "x"}}));
          continue;
        }
        if (body->kind == Formula::Kind::Quantified && !contains_quantifier(body->children[0]) &&
            body->var != c->var) {
          auto ren = detail::orient(c->var, body->var);
          FormulaPtr inner = rename_variables(body->children[0], ren);
          if (body->quant == QuantKind::Forall) {
            matrix_parts.push_back(inner);
            continue;
          }
          if (body->quant == QuantKind::Exists) {
            out.snf.exist_bodies.push_back(inner);
            continue;
          }
        }
        introduce(c);
        continue;
      }
      if (c->quant == QuantKind::Exists) {
        // a closed exists-conjunct goes through the same replacement, ending
        // up as a nullary atom forced true by the matrix
        introduce(c);
        continue;
      }
      throw NormalizeError("counting quantifiers must be reduced before the SNF transform");
    }
    introduce(c);
  }

  out.snf.matrix = conjoin_all(matrix_parts);
  return out;
}

inline SnfResult to_snf(const FormulaPtr& sentence, const WeightMap& weights) {
  detail::FreshNames fresh;
  return to_snf(sentence, weights, fresh);
}

// Ensures every forall-exists body is a single binary atom R_k(x,y): compound
// bodies get a fresh binary predicate tied to the body by an equivalence in
// the matrix. Identical bodies stay distinct.
inline void atomize_existentials(SnfSentence& snf, WeightMap& weights,
                                 std::vector<ReductionStep>& steps, detail::FreshNames& fresh) {
  std::vector<FormulaPtr> matrix_parts = top_level_conjuncts(snf.matrix);
  for (auto& body : snf.exist_bodies) {
    bool atomic = body->kind == Formula::Kind::Atom && body->args.size() == 2 &&
                  body->args[0] == Term::var("x") && body->args[1] == Term::var("y");
    if (atomic) continue;
    std::string name = fresh.next("R");
    FormulaPtr atom = Formula::atom(name, {Term::var("x"), Term::var("y")});
    FormulaPtr definition = Formula::iff(atom, body);
    matrix_parts.push_back(definition);
    weights.set(name, 1, 1);
    steps.push_back({name, definition, 1});
    body = atom;
  }
  snf.matrix = conjoin_all(matrix_parts);
}

// Builds Gamma_T: the matrix stays, each forall-exists conjunct turns into an
// implicit Tseitin obligation, and every element starts with the full block.
inline GeneralProblem tseitinize(const SnfSentence& snf, const WeightMap& weights,
                                 const Domain& domain) {
  GeneralProblem gp;
  gp.matrix = snf.matrix;
  for (const auto& body : snf.exist_bodies) {
    if (!(body->kind == Formula::Kind::Atom && body->args.size() == 2))
      throw NormalizeError("tseitinize needs atomized existential bodies");
    gp.exist_preds.push_back(body->predicate);
  }
  if (gp.exist_preds.size() > 16)
    throw NormalizeError("too many existential conjuncts: " + std::to_string(gp.exist_preds.size()));
  gp.weights = weights;
  gp.domain = domain;
  gp.constraints = Formula::boolean(true);

  std::map<std::string, uint32_t> preds;
  collect_predicates(gp.matrix, preds);
  for (const auto& body : snf.exist_bodies) collect_predicates(body, preds);
  for (const auto& p : gp.exist_preds) {
    auto it = preds.find(p);
    if (it == preds.end() || it->second != 2)
      throw NormalizeError("existential body predicate " + p + " must be binary");
  }
  for (const auto& [name, arity] : preds) {
    gp.vocabulary.push_back({name, arity});
    gp.weights.ensure_default(name);
  }
  gp.blocks.assign(domain.size(), gp.full_block());
  return gp;
}

struct CountingReduction {
  FormulaPtr fo2_sentence;
  FormulaPtr constraints;
  WeightMap weights;
  std::vector<ReductionStep> steps;
};

// Eliminates the SC2 counting conjuncts. forall-exists_{=k} turns into a
// cardinality constraint |P| = k*n plus k disjoint function-like predicates
// (each reduced model has (k!)^n preimages); exists_{=k}-forall turns into a
// unary |U| = k with U(x) equivalent to forall y: phi(x,y).
inline CountingReduction reduce_counting(const FormulaPtr& sentence, const WeightMap& weights,
                                         const Domain& domain, detail::FreshNames& fresh) {
  CountingReduction out;
  out.weights = weights;
  std::vector<FormulaPtr> gamma_parts;
  std::vector<FormulaPtr> constraint_parts;
  uint32_t n = domain.size();

  auto ensure_atomic_body = [&](FormulaPtr body) -> std::string {
    if (body->kind == Formula::Kind::Atom && body->args.size() == 2 &&
        body->args[0] == Term::var("x") && body->args[1] == Term::var("y"))
      return body->predicate;
    std::string name = fresh.next("R");
    FormulaPtr atom = Formula::atom(name, {Term::var("x"), Term::var("y")});
    FormulaPtr definition = Formula::iff(atom, body);
    gamma_parts.push_back(Formula::forall("x", Formula::forall("y", definition)));
    out.weights.set(name, 1, 1);
    out.steps.push_back({name, definition, 1});
    return name;
  };

  for (const auto& c : top_level_conjuncts(sentence)) {
    bool counting_here = contains_counting_quantifier(c);
    if (!counting_here) {
      gamma_parts.push_back(c);
      continue;
    }
    // forall x exists_{=k} y: phi(x,y)
    if (c->kind == Formula::Kind::Quantified && c->quant == QuantKind::Forall &&
        c->children[0]->kind == Formula::Kind::Quantified &&
        c->children[0]->quant == QuantKind::ExistsExactly &&
        !contains_counting_quantifier(c->children[0]->children[0])) {
      const FormulaPtr& inner = c->children[0];
      if (contains_quantifier(inner->children[0]))
        throw NormalizeError("counting quantifier body must be quantifier-free");
      auto ren = detail::orient(c->var, inner->var);
      FormulaPtr body = rename_variables(inner->children[0], ren);
      std::string p = ensure_atomic_body(body);
      uint32_t k = inner->count_k;
      constraint_parts.push_back(
          Formula::cardinality(p, Comparator::Eq, static_cast<int64_t>(k) * n));
      std::vector<std::string> funcs;
      for (uint32_t i = 0; i < k; ++i) funcs.push_back(fresh.next("Rp"));
      FormulaPtr p_atom = Formula::atom(p, {Term::var("x"), Term::var("y")});
      FormulaPtr disj = Formula::boolean(false);
      for (size_t i = 0; i < funcs.size(); ++i) {
        FormulaPtr f_atom = Formula::atom(funcs[i], {Term::var("x"), Term::var("y")});
        disj = (i == 0) ? f_atom : Formula::disj(disj, f_atom);
      }
      FormulaPtr equivalence = Formula::iff(p_atom, disj);
      gamma_parts.push_back(Formula::forall("x", Formula::forall("y", equivalence)));
      for (const auto& fp : funcs) {
        gamma_parts.push_back(Formula::forall(
            "x", Formula::exists("y", Formula::atom(fp, {Term::var("x"), Term::var("y")}))));
        out.weights.set(fp, 1, 1);
      }
      for (size_t i = 0; i < funcs.size(); ++i)
        for (size_t j = i + 1; j < funcs.size(); ++j)
          gamma_parts.push_back(Formula::forall(
              "x", Formula::forall(
                       "y", Formula::disj(
                                Formula::negate(Formula::atom(funcs[i], {Term::var("x"), Term::var("y")})),
                                Formula::negate(Formula::atom(funcs[j], {Term::var("x"), Term::var("y")}))))));
      Integer fiber = int_pow(factorial(k), n);
      std::string label = funcs.empty() ? p : funcs.front();
      out.steps.push_back({label, equivalence, fiber});
      continue;
    }
    // exists_{=k} x forall y: phi(x,y)
    if (c->kind == Formula::Kind::Quantified && c->quant == QuantKind::ExistsExactly &&
        c->children[0]->kind == Formula::Kind::Quantified &&
        c->children[0]->quant == QuantKind::Forall &&
        !contains_counting_quantifier(c->children[0]->children[0])) {
      const FormulaPtr& inner = c->children[0];
      if (contains_quantifier(inner->children[0]))
        throw NormalizeError("counting quantifier body must be quantifier-free");
      auto ren = detail::orient(c->var, inner->var);
      FormulaPtr body = rename_variables(inner->children[0], ren);
      std::string u = fresh.next("U");
      FormulaPtr u_atom = Formula::atom(u, {Term::var("x")});
      FormulaPtr definition = Formula::iff(u_atom, Formula::forall("y", body));
      gamma_parts.push_back(Formula::forall("x", definition));
      constraint_parts.push_back(Formula::cardinality(u, Comparator::Eq, c->count_k));
      out.weights.set(u, 1, 1);
      out.steps.push_back({u, definition, 1});
      continue;
    }
    throw NormalizeError(
        "counting quantifiers are only supported as top-level forall-exists_{=k} or "
        "exists_{=k}-forall conjuncts: " +
        render_formula(c));
  }

  out.fo2_sentence = conjoin_all(gamma_parts);
  out.constraints = constraint_parts.empty() ? Formula::boolean(true) : conjoin_all(constraint_parts);
  return out;
}

// MLN reduction: hard rules become universal closures; each soft rule gets a
// fresh equivalence predicate xi with w(xi) set to the rule's factor.
inline Problem mln_to_wfoms(const std::vector<MlnRule>& rules, const Domain& domain) {
  detail::FreshNames fresh;
  Problem out;
  out.domain = domain;
  std::vector<FormulaPtr> parts;
  auto close = [](FormulaPtr f) {
    auto fv = free_variables(f);
    for (auto it = fv.rbegin(); it != fv.rend(); ++it) f = Formula::forall(*it, f);
    return f;
  };
  std::map<std::string, uint32_t> mln_preds;
  for (const auto& rule : rules) {
    collect_predicates(rule.formula, mln_preds);
    auto fv = free_variables(rule.formula);
    if (rule.hard) {
      parts.push_back(close(rule.formula));
      continue;
    }
    std::string name = fresh.next("xi");
    std::vector<Term> args;
    for (const auto& v : fv) args.push_back(Term::var(v));
    FormulaPtr xi = Formula::atom(name, args);
    parts.push_back(close(Formula::iff(xi, rule.formula)));
    out.weights.set(name, rule.weight, 1);
  }
  out.sentence = conjoin_all(parts);
  out.constraints = Formula::boolean(true);
  out.vocabulary = sentence_vocabulary(out.sentence);
  for (const auto& p : out.vocabulary) out.weights.ensure_default(p.name);
  // samples project onto the MLN's own vocabulary; the xi predicates are
  // determined by their equivalences, so the projection is bijective
  for (const auto& [name, arity] : mln_preds) out.output_vocabulary.push_back({name, arity});
  return out;
}

// Full normalization pipeline from a parsed problem to the general form the
// counter and sampler work with.
inline GeneralProblem normalize(const Problem& problem) {
  detail::FreshNames fresh;
  if (contains_ground_atom(problem.sentence))
    throw NormalizeError("ground atoms are not supported by the lifted pipeline");

  // cardinality atoms may appear as top-level conjuncts of the sentence; fold
  // them into the constraints
  std::vector<FormulaPtr> sentence_parts;
  std::vector<FormulaPtr> constraint_parts;
  if (problem.constraints && !(problem.constraints->kind == Formula::Kind::BoolConst &&
                               problem.constraints->value))
    constraint_parts.push_back(problem.constraints);
  for (const auto& c : top_level_conjuncts(problem.sentence)) {
    if (contains_cardinality_atom(c)) {
      if (contains_quantifier(c) || contains_ground_atom(c))
        throw NormalizeError("cardinality atoms must form top-level constraint conjuncts");
      constraint_parts.push_back(c);
    } else {
      sentence_parts.push_back(c);
    }
  }
  FormulaPtr sentence = conjoin_all(sentence_parts);

  WeightMap weights = problem.weights;
  std::vector<ReductionStep> steps;

  if (contains_counting_quantifier(sentence)) {
    auto red = reduce_counting(sentence, weights, problem.domain, fresh);
    sentence = red.fo2_sentence;
    weights = red.weights;
    for (auto& s : red.steps) steps.push_back(std::move(s));
    if (!(red.constraints->kind == Formula::Kind::BoolConst && red.constraints->value))
      constraint_parts.push_back(red.constraints);
  }

  auto snf = to_snf(sentence, weights, fresh);
  weights = snf.weights;
  for (auto& s : snf.steps) steps.push_back(std::move(s));
  atomize_existentials(snf.snf, weights, steps, fresh);

  GeneralProblem gp = tseitinize(snf.snf, weights, problem.domain);
  gp.constraints = constraint_parts.empty() ? Formula::boolean(true) : conjoin_all(constraint_parts);
  gp.trace.skeleton = problem.vocabulary;
  for (auto& s : steps) gp.trace.add(s.introduced, s.definition, s.fiber);

  // every constrained predicate must exist in the final vocabulary
  std::set<std::string> known;
  for (const auto& p : gp.vocabulary) known.insert(p.name);
  std::function<void(const FormulaPtr&)> check = [&](const FormulaPtr& f) {
    if (f->kind == Formula::Kind::CardinalityAtom && !known.count(f->predicate))
      throw NormalizeError("constraint mentions unknown predicate " + f->predicate);
    for (const auto& c : f->children) check(c);
  };
  check(gp.constraints);
  return gp;
}

}  // namespace wfoms
