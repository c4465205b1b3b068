#include <catch2/catch_amalgamated.hpp>

#include "wfoms/configuration.hpp"
#include "wfoms/evaluate.hpp"
#include "wfoms/formula.hpp"
#include "wfoms/parser.hpp"
#include "wfoms/polynomial.hpp"
#include "wfoms/rational.hpp"
#include "wfoms/rng.hpp"
#include "wfoms/structure.hpp"
#include "wfoms/types.hpp"

using namespace wfoms;

TEST_CASE("rational parsing is exact") {
  CHECK(parse_rational("3") == Rational(3));
  CHECK(parse_rational("5/7") == Rational(5, 7));
  CHECK(parse_rational("1.25") == Rational(5, 4));
  CHECK(parse_rational("-0.5") == Rational(-1, 2));
  CHECK(parse_rational("1.22140") == Rational(6107, 5000));
  CHECK_THROWS_AS(parse_rational("exp(0.2)"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rational("1.2.3"), std::invalid_argument);
}

TEST_CASE("combinatorics helpers") {
  CHECK(binomial(8, 3) == 56);
  CHECK(binomial(3, 5) == 0);
  CHECK(multinomial({2, 1, 1}) == 12);
  CHECK(multinomial({}) == 1);
  CHECK(rat_pow(Rational(3, 7), 3) == Rational(27, 343));
  CHECK(rat_pow(Rational(5), 0) == 1);
}

TEST_CASE("configuration space enumerates compositions exactly once") {
  ConfigurationSpace space(2, 2);
  auto all = space.all();
  REQUIRE(all.size() == 3);
  CHECK(space.size() == 3);
  std::set<std::vector<uint32_t>> seen(all.begin(), all.end());
  CHECK(seen.count({0, 2}) == 1);
  CHECK(seen.count({1, 1}) == 1);
  CHECK(seen.count({2, 0}) == 1);

  CHECK(ConfigurationSpace(0, 3).all() == std::vector<std::vector<uint32_t>>{{0, 0, 0}});
  CHECK(ConfigurationSpace(5, 4).all().size() == 56);  // C(8,3) by direct enumeration
  CHECK(ConfigurationSpace(5, 4).size() == 56);
}

TEST_CASE("configuration space vectors sum to the total and are distinct") {
  for (uint32_t total : {0u, 1u, 4u, 7u}) {
    for (uint32_t slots : {1u, 2u, 3u}) {
      ConfigurationSpace space(total, slots);
      std::set<std::vector<uint32_t>> seen;
      space.for_each([&](const std::vector<uint32_t>& v) {
        uint32_t sum = 0;
        for (uint32_t x : v) sum += x;
        CHECK(sum == total);
        CHECK(seen.insert(v).second);
      });
      CHECK(Integer(static_cast<unsigned long>(seen.size())) == space.size());
    }
  }
}

TEST_CASE("symbolic weights behave like sparse polynomials") {
  using SW = SymbolicWeight;
  auto x = SW::monomial({1, 0}, 1);
  auto y = SW::monomial({0, 1}, 1);
  auto p = x + y;  // x + y
  auto q = p.pow(2);
  REQUIRE(q.term_count() == 3);
  CHECK(q.evaluate({Rational(2), Rational(3)}) == 25);

  // evaluation is a homomorphism: (p*q)(v) == p(v) * q(v)
  auto r = SW::monomial({2, 1}, Rational(3, 2)) + SW::constant(2, Rational(1, 3));
  std::vector<Rational> v{Rational(5, 7), Rational(2)};
  CHECK((p * r).evaluate(v) == p.evaluate(v) * r.evaluate(v));
  CHECK((p + r).evaluate(v) == p.evaluate(v) + r.evaluate(v));
  CHECK(p.pow(5).evaluate(v) == rat_pow(p.evaluate(v), 5));

  // cancellation removes terms entirely
  auto minus_x = SW::monomial({1, 0}, -1);
  CHECK((x + minus_x).is_zero());

  // filtered sums split the evaluation by exponent
  Rational only_x = q.filtered_sum({Rational(2), Rational(3)},
                                   [](const std::vector<uint32_t>& e) { return e[1] == 0; });
  CHECK(only_x == 4);
}

TEST_CASE("1-type and 2-table enumeration over a small vocabulary") {
  // vocab {E/2}: one 1-literal E(x,x), two 2-literals E(x,y), E(y,x)
  TypeSpace space({{"E", 2}});
  CHECK(space.num_one_types() == 2);
  CHECK(space.num_two_tables() == 4);

  // vocab {F/2, G/1}: four 1-types, including F(x,x) & ~G(x)
  TypeSpace fg({{"F", 2}, {"G", 1}});
  CHECK(fg.num_one_types() == 4);
  bool found = false;
  for (OneTypeId t = 0; t < fg.num_one_types(); ++t) {
    if (fg.one_type_holds(t, "F", true) && !fg.one_type_holds(t, "G", false)) found = true;
  }
  CHECK(found);

  // vocab {P/1, Q/1, R/2} has 8 one-types; no binary predicate gives 1 table
  CHECK(TypeSpace({{"P", 1}, {"Q", 1}, {"R", 2}}).num_one_types() == 8);
  CHECK(TypeSpace({{"P", 1}}).num_two_tables() == 1);
}

TEST_CASE("coherence and 1-type validity for the graph sentence") {
  TypeSpace space({{"E", 2}});
  auto matrix = parse_formula("(E(x,y) -> E(y,x)) & ~E(x,x)");
  auto nullary = [](const std::string&) -> bool { throw std::logic_error("no nullary"); };

  OneTypeId no_loop = 0, loop = 0;
  for (OneTypeId t = 0; t < space.num_one_types(); ++t)
    (space.one_type_holds(t, "E", true) ? loop : no_loop) = t;

  CHECK(valid_one_type(matrix, space, no_loop, nullary));
  CHECK_FALSE(valid_one_type(matrix, space, loop, nullary));

  TwoTableId both = 0, forward_only = 0, none = 0;
  for (TwoTableId t = 0; t < space.num_two_tables(); ++t) {
    bool fwd = space.table_holds(t, "E", true), bwd = space.table_holds(t, "E", false);
    if (fwd && bwd) both = t;
    if (fwd && !bwd) forward_only = t;
    if (!fwd && !bwd) none = t;
  }
  CHECK(coherent(matrix, space, no_loop, no_loop, both, nullary));
  CHECK(coherent(matrix, space, no_loop, no_loop, none, nullary));
  CHECK_FALSE(coherent(matrix, space, no_loop, no_loop, forward_only, nullary));

  // trivial matrix accepts every combination
  auto top = Formula::boolean(true);
  for (TwoTableId t = 0; t < space.num_two_tables(); ++t)
    CHECK(coherent(top, space, no_loop, no_loop, t, nullary));
  CHECK(valid_one_type(top, space, loop, nullary));
}

TEST_CASE("relaxation removes witnessed obligations and is monotone") {
  TypeSpace space({{"R1", 2}, {"R2", 2}});
  std::vector<std::string> exist_preds{"R1", "R2"};
  OneTypeId tau = 0;

  TwoTableId backward_r1 = 0;
  for (TwoTableId t = 0; t < space.num_two_tables(); ++t)
    if (space.table_holds(t, "R1", false) && !space.table_holds(t, "R2", false)) backward_r1 = t;

  CellType cell{0b11, tau};
  CellType relaxed = relax(space, cell, backward_r1, exist_preds);
  CHECK(relaxed.block == 0b10);  // R1 witnessed, R2 still open

  // no witness, no relaxation
  TwoTableId empty_table = 0;
  for (TwoTableId t = 0; t < space.num_two_tables(); ++t)
    if (!space.table_holds(t, "R1", false) && !space.table_holds(t, "R2", false)) empty_table = t;
  CHECK(relax(space, cell, empty_table, exist_preds).block == 0b11);

  // idempotent, and the empty block stays empty
  CHECK(relax(space, relaxed, backward_r1, exist_preds).block == relaxed.block);
  CHECK(relax(space, CellType{0, tau}, backward_r1, exist_preds).block == 0);

  // monotone: always a subset of the input block
  for (TwoTableId t = 0; t < space.num_two_tables(); ++t) {
    for (BlockMask b : {0u, 1u, 2u, 3u}) {
      CellType out = relax(space, CellType{b, tau}, t, exist_preds);
      CHECK((out.block & ~b) == 0);
    }
  }
}

TEST_CASE("structure weights multiply literal weights") {
  Domain d = Domain::of_size(2);
  WeightMap weights;
  weights.set("E", 3, 1);

  Structure s(d);
  s.insert("E", {0, 1});
  s.insert("E", {1, 0});
  // two true literals at weight 3, two false at weight 1
  CHECK(structure_weight(s, {{"E", 2}}, weights) == 9);

  WeightMap unit;
  unit.set("E", 1, 1);
  CHECK(structure_weight(s, {{"E", 2}}, unit) == 1);

  // empty literal set: empty product
  CHECK(literal_set_weight({}, weights) == 1);
  CHECK_THROWS_AS(literal_set_weight({{GroundAtom{"Q", {0}}, true}}, weights), std::invalid_argument);

  // multiplicative over disjoint literal sets
  std::vector<std::pair<GroundAtom, bool>> a{{GroundAtom{"E", {0, 1}}, true}},
      b{{GroundAtom{"E", {1, 0}}, false}, {GroundAtom{"E", {0, 0}}, true}};
  auto joined = a;
  joined.insert(joined.end(), b.begin(), b.end());
  CHECK(literal_set_weight(joined, weights) == literal_set_weight(a, weights) * literal_set_weight(b, weights));
}

TEST_CASE("evaluate implements standard semantics with counting") {
  auto problem = parse_problem(
      "domain: 2\n"
      "sentence: (forall x forall y: (E(x,y) -> E(y,x)) & ~E(x,x)) & (forall x exists y: E(x,y))\n");
  Structure good(problem.domain);
  good.insert("E", {0, 1});
  good.insert("E", {1, 0});
  CHECK(evaluate(problem.sentence, good));

  Structure empty(problem.domain);
  CHECK_FALSE(evaluate(problem.sentence, empty));

  CHECK(evaluate(Formula::cardinality("E", Comparator::Eq, 2), good));
  CHECK_FALSE(evaluate(Formula::cardinality("E", Comparator::Lt, 2), good));

  auto counting = parse_formula("forall x exists_{=1} y: E(x,y)");
  CHECK(evaluate(counting, good));
  Structure fn(problem.domain);
  fn.insert("E", {0, 1});
  fn.insert("E", {1, 1});
  CHECK(evaluate(counting, fn));
  fn.insert("E", {0, 0});
  CHECK_FALSE(evaluate(counting, fn));

  auto open = Formula::atom("E", {Term::var("x"), Term::var("y")});
  CHECK_THROWS_AS(evaluate(open, good), std::invalid_argument);
}

TEST_CASE("every structure decomposes into 1-types and 2-tables uniquely") {
  // random structures over {P/1, E/2}; reconstructing from the realized
  // types is the identity
  TypeSpace space({{"E", 2}, {"P", 1}});
  Domain d = Domain::of_size(3);
  std::mt19937_64 gen(12345);
  for (int trial = 0; trial < 50; ++trial) {
    Structure s(d);
    for (uint32_t a = 0; a < 3; ++a) {
      if (gen() & 1) s.insert("P", {a});
      for (uint32_t b = 0; b < 3; ++b)
        if (gen() & 1) s.insert("E", {a, b});
    }
    // realized 1-types
    std::vector<OneTypeId> taus(3);
    for (uint32_t a = 0; a < 3; ++a) {
      int match = -1;
      for (OneTypeId t = 0; t < space.num_one_types(); ++t) {
        bool ok = space.one_type_holds(t, "P", false) == s.holds("P", {a}) &&
                  space.one_type_holds(t, "E", true) == s.holds("E", {a, a});
        if (ok) {
          CHECK(match == -1);  // exactly one 1-type per element
          match = static_cast<int>(t);
        }
      }
      REQUIRE(match >= 0);
      taus[a] = static_cast<OneTypeId>(match);
    }
    // realized 2-tables, then reconstruct
    Structure rebuilt(d);
    for (uint32_t a = 0; a < 3; ++a) {
      if (space.one_type_holds(taus[a], "P", false)) rebuilt.insert("P", {a});
      if (space.one_type_holds(taus[a], "E", true)) rebuilt.insert("E", {a, a});
    }
    for (uint32_t a = 0; a < 3; ++a) {
      for (uint32_t b = a + 1; b < 3; ++b) {
        int match = -1;
        for (TwoTableId t = 0; t < space.num_two_tables(); ++t) {
          bool ok = space.table_holds(t, "E", true) == s.holds("E", {a, b}) &&
                    space.table_holds(t, "E", false) == s.holds("E", {b, a});
          if (ok) {
            CHECK(match == -1);
            match = static_cast<int>(t);
          }
        }
        REQUIRE(match >= 0);
        auto table = static_cast<TwoTableId>(match);
        if (space.table_holds(table, "E", true)) rebuilt.insert("E", {a, b});
        if (space.table_holds(table, "E", false)) rebuilt.insert("E", {b, a});
      }
    }
    CHECK(rebuilt == s);
  }
}

TEST_CASE("draw_discrete is exact on point masses and errors on zero input") {
  Rng rng(7);
  CHECK(draw_discrete({Rational(0), Rational(3), Rational(0)}, rng) == 1);
  CHECK_THROWS_AS(draw_discrete({Rational(0), Rational(0)}, rng), std::invalid_argument);

  // (1,1): both indices appear
  bool saw0 = false, saw1 = false;
  for (int i = 0; i < 64; ++i) {
    size_t pick = draw_discrete({Rational(1), Rational(1)}, rng);
    (pick == 0 ? saw0 : saw1) = true;
  }
  CHECK((saw0 && saw1));
}

TEST_CASE("draw_discrete matches its distribution statistically") {
  // weights (1,2,3): frequencies within the DKW band at alpha=0.01
  Rng rng(99);
  const int N = 60000;
  std::array<int, 3> hits{0, 0, 0};
  for (int i = 0; i < N; ++i) hits[draw_discrete({Rational(1), Rational(2), Rational(3)}, rng)] += 1;
  double eps = std::sqrt(std::log(2.0 / 0.01) / (2.0 * N));
  std::array<double, 3> expect_cdf{1.0 / 6, 3.0 / 6, 1.0};
  double cum = 0;
  for (int i = 0; i < 3; ++i) {
    cum += static_cast<double>(hits[i]) / N;
    CHECK(std::abs(cum - expect_cdf[i]) <= eps);
  }
}

TEST_CASE("seeded rng reproduces its stream and subseeds are stable") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.below(uint64_t(1000)) == b.below(uint64_t(1000)));
  CHECK(derive_subseed(1, 0) != derive_subseed(1, 1));
  CHECK(derive_subseed(5, 3) == derive_subseed(5, 3));

  Rng c(1);
  Integer big = int_pow(Integer(10), 40);
  for (int i = 0; i < 20; ++i) {
    Integer v = c.below(big);
    CHECK(v >= 0);
    CHECK(v < big);
  }
}
