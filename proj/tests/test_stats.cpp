#include <catch2/catch_amalgamated.hpp>

#include "wfoms/oracle.hpp"
#include "wfoms/presets.hpp"
#include "wfoms/sampler.hpp"
#include "wfoms/stats.hpp"

using namespace wfoms;

TEST_CASE("dkw epsilon formula values") {
  CHECK_THAT(dkw_epsilon(100000, 1, 0.05), Catch::Matchers::WithinAbs(0.0042947, 1e-6));
  CHECK_THAT(dkw_epsilon(10000, 1, 0.05), Catch::Matchers::WithinAbs(0.013581, 1e-5));
  CHECK_THAT(dkw_epsilon(1, 1, 0.999999), Catch::Matchers::WithinAbs(std::sqrt(std::log(2.0) / 2.0), 1e-3));
  // multivariate bound uses k(n+1)
  CHECK_THAT(dkw_epsilon(1000, 2, 0.05), Catch::Matchers::WithinAbs(std::sqrt(std::log(2 * 1001 / 0.05) / 2000.0), 1e-9));
  CHECK_THROWS_AS(dkw_epsilon(0, 1, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(dkw_epsilon(10, 1, 1.5), std::invalid_argument);
}

TEST_CASE("ks test accepts its own reference and rejects a wrong one") {
  // uniform reference over 6 points, samples drawn from it
  std::map<std::vector<int64_t>, Rational> reference;
  for (int64_t v = 0; v < 6; ++v) reference[{v}] = Rational(1, 6);
  Rng rng(1234);
  std::vector<std::vector<int64_t>> samples;
  for (int i = 0; i < 20000; ++i)
    samples.push_back({static_cast<int64_t>(rng.below(uint64_t(6)))});
  KsReport ok = ks_test(samples, reference, 0.05);
  CHECK(ok.pass);
  CHECK(ok.dimension == 1);
  CHECK(ok.samples == 20000);

  // constant samples against the uniform reference fail for large n
  std::vector<std::vector<int64_t>> constant(20000, {0});
  KsReport bad = ks_test(constant, reference, 0.05);
  CHECK_FALSE(bad.pass);
  CHECK(bad.max_deviation > 0.5);

  // report renders as json
  CHECK(ok.to_json().find("\"pass\":true") != std::string::npos);
}

TEST_CASE("count distribution of a free unary predicate is binomial") {
  Problem p = parse_problem("domain: 2\nsentence: forall x: P(x) | ~P(x)\n");
  auto dist = count_distribution(p, {"P"});
  REQUIRE(dist.size() == 3);
  CHECK(dist.at({0}) == Rational(1, 4));
  CHECK(dist.at({1}) == Rational(1, 2));
  CHECK(dist.at({2}) == Rational(1, 4));
}

TEST_CASE("a hard cardinality constraint gives a point mass") {
  Problem p = parse_problem(
      "domain: 3\n"
      "sentence: forall x: P(x) | ~P(x)\n"
      "constraint: |P| = 1\n");
  auto dist = count_distribution(p, {"P"});
  REQUIRE(dist.size() == 1);
  CHECK(dist.at({1}) == 1);
}

TEST_CASE("count distributions sum to one and match the oracle histogram") {
  for (const char* name : {"friends-smokers", "employment"}) {
    Problem p = build_preset(name, 2);
    const auto& preset = find_preset(name);
    auto dist = count_distribution(p, preset.count_preds);

    Rational total(0);
    for (const auto& [key, prob] : dist) total += prob;
    CHECK(total == 1);

    // aggregate the oracle distribution by the tracked counts
    Oracle oracle(p);
    std::map<std::vector<int64_t>, Rational> expected;
    for (uint64_t a : oracle.model_assignments()) {
      Structure s = oracle.structure_of(a);
      std::vector<int64_t> key;
      for (const auto& pred : preset.count_preds)
        key.push_back(static_cast<int64_t>(s.count_true(pred)));
      expected[key] += oracle.weight_of(a) / oracle.brute_count();
    }
    REQUIRE(expected.size() == dist.size());
    for (const auto& [key, prob] : expected) {
      REQUIRE(dist.count(key) == 1);
      CHECK(dist.at(key) == prob);
    }
  }
}

TEST_CASE("empirical count distribution of sampler output passes the ks test") {
  Problem p = build_preset("friends-smokers", 3);
  const auto& preset = find_preset("friends-smokers");
  auto reference = count_distribution(p, preset.count_preds);

  Wms sampler(p);
  std::vector<std::vector<int64_t>> samples;
  for (int i = 0; i < 4000; ++i) {
    Rng rng(derive_subseed(424242, static_cast<uint64_t>(i)));
    auto result = sampler.sample(rng);
    std::vector<int64_t> key;
    for (const auto& pred : preset.count_preds)
      key.push_back(static_cast<int64_t>(result.model.count_true(pred)));
    samples.push_back(std::move(key));
  }
  KsReport report = ks_test(samples, reference, 0.05);
  CHECK(report.dimension == 2);
  CHECK(report.pass);
}

TEST_CASE("uniformity of the sampler over the model list") {
  Problem p = build_preset("derangements", 4);  // 9 models
  Oracle oracle(p);
  Wms sampler(p);
  std::vector<std::vector<int64_t>> samples;
  for (int i = 0; i < 900; ++i) {
    Rng rng(derive_subseed(5150, static_cast<uint64_t>(i)));
    samples.push_back({oracle.model_index(sampler.sample(rng).model)});
  }
  std::map<std::vector<int64_t>, Rational> reference;
  for (int64_t m = 0; m < 9; ++m) reference[{m}] = Rational(1, 9);
  CHECK(ks_test(samples, reference, 0.05).pass);
}
