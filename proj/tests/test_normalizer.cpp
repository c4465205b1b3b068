#include <catch2/catch_amalgamated.hpp>

#include "wfoms/normalizer.hpp"
#include "wfoms/oracle.hpp"
#include "wfoms/parser.hpp"
#include "wfoms/presets.hpp"

using namespace wfoms;

namespace {

// Re-expresses an SNF sentence as a parseable problem for the brute-force
// oracle: forall-forall matrix plus forall-exists conjuncts.
Problem problem_from_snf(const SnfSentence& snf, const WeightMap& weights, const Domain& domain) {
  std::vector<FormulaPtr> parts;
  parts.push_back(Formula::forall("x", Formula::forall("y", snf.matrix)));
  for (const auto& body : snf.exist_bodies)
    parts.push_back(Formula::forall("x", Formula::exists("y", body)));
  Problem out;
  out.sentence = conjoin_all(parts);
  out.domain = domain;
  out.constraints = Formula::boolean(true);
  out.vocabulary = sentence_vocabulary(out.sentence);
  out.weights = weights;
  for (const auto& p : out.vocabulary) out.weights.ensure_default(p.name);
  return out;
}

Problem reduced_problem(const FormulaPtr& sentence, const FormulaPtr& constraints,
                        const WeightMap& weights, const Domain& domain) {
  Problem out;
  out.sentence = sentence;
  out.constraints = constraints;
  out.domain = domain;
  out.vocabulary = sentence_vocabulary(sentence);
  out.weights = weights;
  for (const auto& p : out.vocabulary) out.weights.ensure_default(p.name);
  return out;
}

// Soundness as preimage sums: projecting the reduced models onto the source
// vocabulary reproduces the source distribution exactly.
void check_sound_projection(const Problem& source, const Problem& reduced) {
  Oracle src(source);
  Oracle red(reduced);
  REQUIRE(src.brute_count() > 0);
  std::set<std::string> skeleton;
  for (const auto& p : source.vocabulary) skeleton.insert(p.name);

  std::map<std::string, Rational> projected;
  for (uint64_t a : red.model_assignments()) {
    Structure s = red.structure_of(a);
    projected[s.project(skeleton).canonical_text()] += red.weight_of(a) / red.brute_count();
  }
  auto expected = src.exact_distribution();
  REQUIRE(projected.size() == expected.size());
  for (const auto& [text, prob] : expected) {
    REQUIRE(projected.count(text) == 1);
    CHECK(projected[text] == prob);
  }
}

}  // namespace

TEST_CASE("sentences already in SNF pass through unchanged") {
  auto sentence = parse_formula("forall x exists y: E(x,y)");
  WeightMap w;
  w.set("E", 1, 1);
  auto result = to_snf(sentence, w);
  CHECK(result.steps.empty());
  REQUIRE(result.snf.exist_bodies.size() == 1);
  CHECK(render_formula(result.snf.exist_bodies[0]) == "E(x,y)");
}

TEST_CASE("an existential under a disjunction gets a fresh unary predicate") {
  auto sentence = parse_formula("forall x: (exists y: E(x,y)) | B(x)");
  WeightMap w;
  w.set("E", 1, 1);
  w.set("B", 1, 1);
  auto result = to_snf(sentence, w);
  REQUIRE(result.steps.size() == 1);
  std::string aux = result.steps[0].introduced;
  CHECK(aux.rfind("__A", 0) == 0);
  CHECK(result.weights.positive(aux) == 1);
  CHECK(result.weights.negative(aux) == 1);
  REQUIRE(result.snf.exist_bodies.size() == 1);

  // matrix holds the replaced conjunct and the forall-direction axiom
  bool saw_replaced = false;
  for (const auto& part : top_level_conjuncts(result.snf.matrix)) {
    std::string text = render_formula(part);
    if (text == aux + "(x) | B(x)") saw_replaced = true;
  }
  CHECK(saw_replaced);

  // soundness at n = 2 and n = 3, exact distribution equality
  for (uint32_t n : {2u, 3u}) {
    Problem source = reduced_problem(sentence, Formula::boolean(true), w, Domain::of_size(n));
    check_sound_projection(source, problem_from_snf(result.snf, result.weights, Domain::of_size(n)));
  }
}

TEST_CASE("exists-forall sentences produce a nullary auxiliary") {
  auto sentence = parse_formula("exists x forall y: P(x,y)");
  WeightMap w;
  w.set("P", 1, 1);
  auto result = to_snf(sentence, w);
  REQUIRE_FALSE(result.steps.empty());
  bool has_nullary = false;
  std::map<std::string, uint32_t> preds;
  collect_predicates(result.snf.matrix, preds);
  for (const auto& body : result.snf.exist_bodies) collect_predicates(body, preds);
  for (const auto& step : result.steps)
    if (preds.count(step.introduced) && preds[step.introduced] == 0) has_nullary = true;
  CHECK(has_nullary);

  // equisatisfiability checked by the oracle at n = 2
  Problem source = reduced_problem(sentence, Formula::boolean(true), w, Domain::of_size(2));
  check_sound_projection(source, problem_from_snf(result.snf, result.weights, Domain::of_size(2)));
}

TEST_CASE("snf transform is deterministic and domain-independent") {
  auto sentence = parse_formula("forall x: (exists y: E(x,y)) | (forall y: F(x,y))");
  WeightMap w;
  w.set("E", 1, 1);
  w.set("F", 1, 1);
  auto a = to_snf(sentence, w);
  auto b = to_snf(sentence, w);
  CHECK(render_formula(a.snf.matrix) == render_formula(b.snf.matrix));
  REQUIRE(a.snf.exist_bodies.size() == b.snf.exist_bodies.size());
  for (size_t i = 0; i < a.snf.exist_bodies.size(); ++i)
    CHECK(render_formula(a.snf.exist_bodies[i]) == render_formula(b.snf.exist_bodies[i]));
}

TEST_CASE("atomization replaces compound bodies and keeps duplicates distinct") {
  detail::FreshNames fresh;
  SnfSentence snf;
  snf.matrix = Formula::boolean(true);
  auto compound = parse_formula("E(x,y) | E(y,x)");
  snf.exist_bodies = {parse_formula("E(x,y)"), compound, compound};
  WeightMap w;
  w.set("E", 1, 1);
  std::vector<ReductionStep> steps;
  atomize_existentials(snf, w, steps, fresh);

  CHECK(render_formula(snf.exist_bodies[0]) == "E(x,y)");  // already atomic
  REQUIRE(steps.size() == 2);
  CHECK(steps[0].introduced != steps[1].introduced);  // no deduplication
  CHECK(snf.exist_bodies[1]->predicate == steps[0].introduced);
  CHECK(snf.exist_bodies[2]->predicate == steps[1].introduced);

  // soundness of the auxiliary-predicate construction at n = 2
  auto source_sentence = parse_formula("forall x exists y: E(x,y) | E(y,x)");
  WeightMap wsrc;
  wsrc.set("E", 3, 2);
  auto snf_src = to_snf(source_sentence, wsrc);
  atomize_existentials(snf_src.snf, snf_src.weights, snf_src.steps, fresh);
  Problem source = reduced_problem(source_sentence, Formula::boolean(true), wsrc, Domain::of_size(2));
  check_sound_projection(source, problem_from_snf(snf_src.snf, snf_src.weights, Domain::of_size(2)));
}

TEST_CASE("tseitinize assigns full blocks") {
  auto problem = parse_problem(
      "domain: 3\n"
      "sentence: (forall x forall y: (E(x,y) -> E(y,x)) & ~E(x,x)) & (forall x exists y: E(x,y))\n");
  GeneralProblem gp = normalize(problem);
  REQUIRE(gp.exist_preds.size() == 1);
  CHECK(gp.exist_preds[0] == "E");  // body already atomic
  for (BlockMask b : gp.blocks) CHECK(b == 1);

  // pure UFO2: no existential conjuncts, every block empty
  auto ufo = parse_problem("domain: 3\nsentence: forall x forall y: E(x,y) -> E(y,x)\n");
  GeneralProblem gp2 = normalize(ufo);
  CHECK(gp2.exist_preds.empty());
  for (BlockMask b : gp2.blocks) CHECK(b == 0);
  CHECK(gp2.full_block() == 0);

  // m = 2 gives four block types during recursion; initial block is full
  auto two = parse_problem(
      "domain: 2\n"
      "sentence: (forall x exists y: E(x,y)) & (forall x exists y: F(x,y))\n");
  GeneralProblem gp3 = normalize(two);
  CHECK(gp3.exist_preds.size() == 2);
  CHECK(gp3.full_block() == 0b11);
}

TEST_CASE("counting reduction emits cardinality constraints and function predicates") {
  detail::FreshNames fresh;
  WeightMap w;
  w.set("f", 1, 1);
  auto sentence = parse_formula("forall x exists_{=1} y: f(x,y)");
  auto red = reduce_counting(sentence, w, Domain::of_size(3), fresh);

  // |f| = 3, one function predicate, fiber (1!)^3 = 1
  auto catoms = top_level_conjuncts(red.constraints);
  REQUIRE(catoms.size() == 1);
  CHECK(catoms[0]->kind == Formula::Kind::CardinalityAtom);
  CHECK(catoms[0]->predicate == "f");
  CHECK(catoms[0]->threshold == 3);
  Integer fiber(1);
  for (const auto& s : red.steps) fiber *= s.fiber;
  CHECK(fiber == 1);
  size_t rp_count = 0;
  for (const auto& s : red.steps)
    if (s.introduced.rfind("__Rp", 0) == 0) ++rp_count;
  CHECK(rp_count == 1);
}

TEST_CASE("counting reduction with k=2 has fiber (2!)^n") {
  detail::FreshNames fresh;
  WeightMap w;
  w.set("E", 1, 1);
  auto sentence = parse_formula("forall x exists_{=2} y: E(x,y)");
  auto red = reduce_counting(sentence, w, Domain::of_size(5), fresh);
  auto catoms = top_level_conjuncts(red.constraints);
  REQUIRE(catoms.size() == 1);
  CHECK(catoms[0]->threshold == 10);
  Integer fiber(1);
  for (const auto& s : red.steps) fiber *= s.fiber;
  CHECK(fiber == 32);
}

TEST_CASE("exists-exactly-zero and exists-forall forms reduce") {
  detail::FreshNames fresh;
  WeightMap w;
  w.set("P", 1, 1);
  auto sentence = parse_formula("exists_{=0} x forall y: P(x,y)");
  auto red = reduce_counting(sentence, w, Domain::of_size(3), fresh);
  auto catoms = top_level_conjuncts(red.constraints);
  REQUIRE(catoms.size() == 1);
  CHECK(catoms[0]->predicate.rfind("__U", 0) == 0);
  CHECK(catoms[0]->threshold == 0);
}

TEST_CASE("counting reduction fiber counts verified by the oracle") {
  // oracle count of the reduced problem = (k!)^n * source count
  for (uint32_t n : {1u, 2u}) {
    for (uint32_t k : {1u, 2u}) {
      std::ostringstream src;
      src << "domain: " << n << "\nsentence: forall x exists_{=" << k << "} y: E(x,y)\n";
      Problem source = parse_problem(src.str());
      Oracle src_oracle(source);

      detail::FreshNames fresh;
      auto red = reduce_counting(source.sentence, source.weights, source.domain, fresh);
      Problem reduced = reduced_problem(red.fo2_sentence, red.constraints, red.weights, source.domain);
      Oracle red_oracle(reduced);

      Integer fiber(1);
      for (const auto& s : red.steps) fiber *= s.fiber;
      CHECK(red_oracle.brute_count() == Rational(fiber) * src_oracle.brute_count());
    }
  }
}

TEST_CASE("counting quantifiers must be top-level conjuncts") {
  detail::FreshNames fresh;
  WeightMap w;
  w.set("E", 1, 1);
  auto nested = parse_formula("forall x: (exists_{=1} y: E(x,y)) | E(x,x)");
  CHECK_THROWS_AS(reduce_counting(nested, w, Domain::of_size(2), fresh), NormalizeError);
  CHECK_THROWS_AS(to_snf(nested, w), NormalizeError);
}

TEST_CASE("ground atoms are rejected by the lifted pipeline") {
  auto problem = parse_problem("domain: 2\nsentence: forall x: P(x) | P(1)\n");
  CHECK_THROWS_AS(normalize(problem), NormalizeError);
}

TEST_CASE("MLN reduction introduces weighted equivalence predicates") {
  auto rules = parse_mln(
      "inf ~fr(x,x)\n"
      "inf fr(x,y) -> fr(y,x)\n"
      "1 sm(x)\n"
      "122140/100000 fr(x,y) & sm(x) -> sm(y)\n"
      "inf exists y: fr(x,y)\n");
  Problem p = mln_to_wfoms(rules, Domain::of_size(3));
  size_t xi_count = 0;
  bool saw_soft_weight = false;
  for (const auto& pred : p.vocabulary) {
    if (pred.name.rfind("__xi", 0) == 0) {
      ++xi_count;
      if (p.weights.positive(pred.name) == Rational(6107, 5000)) saw_soft_weight = true;
      CHECK(p.weights.negative(pred.name) == 1);
    }
  }
  CHECK(xi_count == 2);  // one per soft rule
  CHECK(saw_soft_weight);

  // a single hard rule introduces no xi predicates
  Problem hard_only = mln_to_wfoms(parse_mln("inf forall x: ~P(x)\n"), Domain::of_size(2));
  for (const auto& pred : hard_only.vocabulary) CHECK(pred.name.rfind("__xi", 0) != 0);
}

TEST_CASE("employment MLN normalizes through SNF with a sound reduction") {
  Problem p = build_preset("employment", 2);
  GeneralProblem gp = normalize(p);
  CHECK(gp.exist_preds.size() == 1);

  // the full normalized sentence projects back onto the MLN vocabulary
  std::vector<FormulaPtr> parts;
  parts.push_back(Formula::forall("x", Formula::forall("y", gp.matrix)));
  for (const auto& r : gp.exist_preds)
    parts.push_back(Formula::forall(
        "x", Formula::exists("y", Formula::atom(r, {Term::var("x"), Term::var("y")}))));
  Problem reduced;
  reduced.sentence = conjoin_all(parts);
  reduced.constraints = Formula::boolean(true);
  reduced.domain = p.domain;
  reduced.vocabulary = sentence_vocabulary(reduced.sentence);
  reduced.weights = gp.weights;
  for (const auto& pr : reduced.vocabulary) reduced.weights.ensure_default(pr.name);

  check_sound_projection(p, reduced);
}

TEST_CASE("normalize records skeleton and fiber in the trace") {
  Problem p = build_preset("kregular", 3, 2);
  GeneralProblem gp = normalize(p);
  REQUIRE(gp.trace.skeleton.size() == 1);
  CHECK(gp.trace.skeleton[0].name == "E");
  CHECK(gp.trace.fiber_multiplicity == 8);  // (2!)^3
}
