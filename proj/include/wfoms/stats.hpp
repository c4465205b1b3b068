#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "wfoms/normalizer.hpp"
#include "wfoms/parser.hpp"
#include "wfoms/wfomc.hpp"

namespace wfoms {

struct KsReport {
  size_t samples = 0;
  size_t dimension = 1;
  double alpha = 0.05;
  double max_deviation = 0.0;
  double epsilon = 0.0;
  bool pass = false;

  std::string to_json() const {
    std::ostringstream os;
    os << "{\"samples\":" << samples << ",\"dimension\":" << dimension << ",\"alpha\":" << alpha
       << ",\"max_deviation\":" << max_deviation << ",\"epsilon\":" << epsilon
       << ",\"pass\":" << (pass ? "true" : "false") << "}";
    return os.str();
  }
};

// DKW bound on the empirical-CDF deviation at confidence alpha:
// sqrt(ln(2/alpha)/2n) for the univariate case, sqrt(ln(k(n+1)/alpha)/2n)
// for k-variate samples.
inline double dkw_epsilon(size_t n, size_t k, double alpha) {
  if (n < 1 || k < 1 || alpha <= 0.0 || alpha >= 1.0)
    throw std::invalid_argument("dkw_epsilon needs n >= 1, k >= 1, 0 < alpha < 1");
  double numer = (k == 1) ? std::log(2.0 / alpha)
                          : std::log(static_cast<double>(k) * (static_cast<double>(n) + 1.0) / alpha);
  return std::sqrt(numer / (2.0 * static_cast<double>(n)));
}

// Kolmogorov-Smirnov test against a discrete reference distribution. The sup
// of |F_n - F| is taken over the observed sample points plus the reference
// support, which is exhaustive for step CDFs on that lattice.
inline KsReport ks_test(const std::vector<std::vector<int64_t>>& samples,
                        const std::map<std::vector<int64_t>, Rational>& reference, double alpha) {
  if (samples.empty()) throw std::invalid_argument("ks_test needs samples");
  size_t dim = samples.front().size();
  for (const auto& s : samples)
    if (s.size() != dim) throw std::invalid_argument("inconsistent sample dimension");
  for (const auto& [point, prob] : reference)
    if (point.size() != dim) throw std::invalid_argument("reference dimension mismatch");

  std::map<std::vector<int64_t>, uint64_t> sample_counts;
  for (const auto& s : samples) sample_counts[s] += 1;

  std::map<std::vector<int64_t>, char> grid;
  for (const auto& [p, c] : sample_counts) grid[p] = 0;
  for (const auto& [p, w] : reference) grid[p] = 0;

  auto leq = [](const std::vector<int64_t>& a, const std::vector<int64_t>& b) {
    for (size_t i = 0; i < a.size(); ++i)
      if (a[i] > b[i]) return false;
    return true;
  };

  double n = static_cast<double>(samples.size());
  double worst = 0.0;
  for (const auto& [point, tag] : grid) {
    uint64_t below = 0;
    for (const auto& [p, c] : sample_counts)
      if (leq(p, point)) below += c;
    double fn = static_cast<double>(below) / n;
    double f = 0.0;
    for (const auto& [p, w] : reference)
      if (leq(p, point)) f += w.get_d();
    worst = std::max(worst, std::abs(fn - f));
  }

  KsReport report;
  report.samples = samples.size();
  report.dimension = dim;
  report.alpha = alpha;
  report.max_deviation = worst;
  report.epsilon = dkw_epsilon(samples.size(), dim, alpha);
  report.pass = report.max_deviation <= report.epsilon;
  return report;
}

// Exact distribution of the tracked predicates' true-atom counts over the
// models of the problem, computed symbolically through the same counting
// machinery the sampler uses.
inline std::map<std::vector<int64_t>, Rational> count_distribution(
    const Problem& problem, const std::vector<std::string>& tracked_preds) {
  GeneralProblem gp = normalize(problem);
  {
    std::set<std::string> known;
    for (const auto& p : gp.vocabulary) known.insert(p.name);
    for (const auto& t : tracked_preds)
      if (!known.count(t)) throw std::invalid_argument("tracked predicate " + t + " not in vocabulary");
  }
  ProblemContext ctx(gp, tracked_preds);
  std::vector<size_t> remap(tracked_preds.size());
  for (size_t i = 0; i < tracked_preds.size(); ++i) {
    const auto& order = ctx.tracked();
    remap[i] = std::find(order.begin(), order.end(), tracked_preds[i]) - order.begin();
  }

  std::map<std::vector<int64_t>, Rational> by_count;
  Rational total(0);
  for (size_t b = 0; b < ctx.num_branches(); ++b) {
    CountContext& c = ctx.branch(b);
    Rational sigma_w = c.sigma_weight();
    if (sigma_w == 0) continue;
    auto sigma_exps = c.sigma_exponents();
    auto thresholds = ctx.residual_after_sigma(c);
    ctx.for_each_configuration(c, [&](const CellConfig& config, const Integer& partitions) {
      const SymbolicWeight& poly = c.w_n_poly(config);
      for (const auto& [exps, coeff] : poly.terms()) {
        if (!c.constraints().trivial() && !c.constraints().satisfied(exps, thresholds)) continue;
        Rational contrib = coeff * Rational(partitions) * sigma_w;
        for (size_t i = 0; i < exps.size(); ++i)
          if (exps[i] > 0) contrib *= rat_pow(c.tracked_values()[i], exps[i]);
        if (contrib == 0) continue;
        std::vector<int64_t> key(tracked_preds.size());
        for (size_t i = 0; i < tracked_preds.size(); ++i)
          key[i] = static_cast<int64_t>(exps[remap[i]]) + sigma_exps[remap[i]];
        by_count[key] += contrib;
        total += contrib;
      }
    });
  }
  if (total == 0) throw std::invalid_argument("problem has no model of positive weight");
  for (auto& [key, w] : by_count) w /= total;
  return by_count;
}

}  // namespace wfoms
