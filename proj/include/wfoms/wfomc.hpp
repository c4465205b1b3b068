#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "wfoms/configuration.hpp"
#include "wfoms/normalizer.hpp"
#include "wfoms/polynomial.hpp"
#include "wfoms/types.hpp"

namespace wfoms {

// Cell configuration: nonzero cells with their cardinalities, sorted by cell.
using CellConfig = std::vector<std::pair<CellType, uint32_t>>;

inline void config_add(CellConfig& config, CellType cell, uint32_t count) {
  if (count == 0) return;
  auto it = std::lower_bound(config.begin(), config.end(), cell,
                             [](const auto& entry, const CellType& c) { return entry.first < c; });
  if (it != config.end() && it->first == cell)
    it->second += count;
  else
    config.insert(it, {cell, count});
}

// The cardinality constraint formula compiled against the tracked-predicate
// order; thresholds live outside so they can shrink during recursion.
class CompiledConstraints {
 public:
  CompiledConstraints() : formula_(Formula::boolean(true)) {}

  CompiledConstraints(FormulaPtr formula, const std::vector<std::string>& tracked)
      : formula_(std::move(formula)) {
    std::function<void(const FormulaPtr&)> walk = [&](const FormulaPtr& f) {
      if (f->kind == Formula::Kind::CardinalityAtom) {
        auto it = std::find(tracked.begin(), tracked.end(), f->predicate);
        if (it == tracked.end())
          throw std::invalid_argument("constraint mentions untracked predicate " + f->predicate);
        atom_of_node_[f.get()] = atoms_.size();
        atoms_.push_back({static_cast<int>(it - tracked.begin()), f->cmp, f->threshold});
        return;
      }
      if (f->kind == Formula::Kind::Atom || f->kind == Formula::Kind::Quantified)
        throw std::invalid_argument("constraints must be boolean combinations of cardinality atoms");
      for (const auto& c : f->children) walk(c);
    };
    walk(formula_);
    pure_conjunction_ = check_pure(formula_);
  }

  struct Atom {
    int tracked_index;
    Comparator cmp;
    int64_t threshold;
  };

  bool trivial() const {
    return atoms_.empty() && formula_->kind == Formula::Kind::BoolConst && formula_->value;
  }

  const std::vector<Atom>& atoms() const { return atoms_; }
  bool pure_conjunction() const { return pure_conjunction_; }

  std::vector<int64_t> initial_thresholds() const {
    std::vector<int64_t> out;
    out.reserve(atoms_.size());
    for (const auto& a : atoms_) out.push_back(a.threshold);
    return out;
  }

  // Evaluates the boolean combination with per-atom residual thresholds.
  bool satisfied(const std::vector<uint32_t>& counts, const std::vector<int64_t>& thresholds) const {
    return eval(formula_, counts, thresholds);
  }

 private:
  bool check_pure(const FormulaPtr& f) const {
    if (f->kind == Formula::Kind::CardinalityAtom) return true;
    if (f->kind == Formula::Kind::BoolConst) return f->value;
    if (f->kind == Formula::Kind::Binary && f->op == Connective::And)
      return check_pure(f->children[0]) && check_pure(f->children[1]);
    return false;
  }

  bool eval(const FormulaPtr& f, const std::vector<uint32_t>& counts,
            const std::vector<int64_t>& thresholds) const {
    switch (f->kind) {
      case Formula::Kind::CardinalityAtom: {
        size_t idx = atom_of_node_.at(f.get());
        const Atom& a = atoms_[idx];
        return comparator_holds(a.cmp, static_cast<int64_t>(counts[a.tracked_index]), thresholds[idx]);
      }
      case Formula::Kind::Not:
        return !eval(f->children[0], counts, thresholds);
      case Formula::Kind::Binary: {
        bool l = eval(f->children[0], counts, thresholds);
        bool r = eval(f->children[1], counts, thresholds);
        switch (f->op) {
          case Connective::And: return l && r;
          case Connective::Or: return l || r;
          case Connective::Implies: return !l || r;
          case Connective::Iff: return l == r;
        }
        return false;
      }
      case Formula::Kind::BoolConst:
        return f->value;
      default:
        throw std::invalid_argument("unexpected node in constraint formula");
    }
  }

  FormulaPtr formula_;
  std::vector<Atom> atoms_;
  std::map<const Formula*, size_t> atom_of_node_;
  bool pure_conjunction_ = true;
};

// A cell together with the subset of its obligations assumed unwitnessed;
// the inclusion-exclusion unit behind the conditional WFOMC.
struct SignedCell {
  CellType cell;
  BlockMask violated = 0;

  int sign() const { return (std::popcount(violated) % 2 == 0) ? 1 : -1; }
};

// All counting machinery for one Gamma_T under one fixed assignment of the
// nullary atoms. Pure except for write-once memo caches.
class CountContext {
 public:
  CountContext(const GeneralProblem& gp, const TypeSpace& space, std::vector<bool> sigma,
               std::vector<std::string> tracked)
      : gp_(&gp), space_(&space), sigma_(std::move(sigma)), tracked_(std::move(tracked)) {
    nullary_fn_ = [this](const std::string& pred) {
      const auto& names = space_->nullary_predicates();
      for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == pred) return static_cast<bool>(sigma_[i]);
      throw std::invalid_argument("unknown nullary predicate " + pred);
    };
    constraints_ = CompiledConstraints(gp.constraints, tracked_);
    for (const auto& name : tracked_) tracked_values_.push_back(gp.weights.positive(name));
    for (OneTypeId t = 0; t < space_->num_one_types(); ++t)
      if (valid_one_type(gp_->matrix, *space_, t, nullary_fn_)) valid_one_types_.push_back(t);
    one_type_weights_.resize(space_->num_one_types());
    table_weights_.resize(space_->num_two_tables());
    numeric_table_weights_.assign(space_->num_two_tables(), Rational(-1));
  }

  CountContext(const CountContext&) = delete;
  CountContext& operator=(const CountContext&) = delete;

  const TypeSpace& space() const { return *space_; }
  const GeneralProblem& problem() const { return *gp_; }
  const std::vector<OneTypeId>& valid_one_types() const { return valid_one_types_; }
  const std::vector<std::string>& tracked() const { return tracked_; }
  const std::vector<Rational>& tracked_values() const { return tracked_values_; }
  const CompiledConstraints& constraints() const { return constraints_; }
  const std::vector<bool>& sigma() const { return sigma_; }
  const std::function<bool(const std::string&)>& nullary_fn() const { return nullary_fn_; }

  int tracked_index(const std::string& pred) const {
    for (size_t i = 0; i < tracked_.size(); ++i)
      if (tracked_[i] == pred) return static_cast<int>(i);
    return -1;
  }

  bool is_valid_one_type(OneTypeId t) const {
    return std::binary_search(valid_one_types_.begin(), valid_one_types_.end(), t);
  }

  // Weight of a 1-type as a monomial: tracked positive literals contribute a
  // variable, everything else its numeric w / wbar.
  const SymbolicWeight& one_type_weight(OneTypeId t) {
    std::scoped_lock lock(weights_mutex_);
    auto& slot = one_type_weights_[t];
    if (!slot.has_value()) {
      SymbolicWeight::Exponents exps(tracked_.size(), 0);
      Rational coeff(1);
      const auto& lits = space_->one_literals();
      for (size_t i = 0; i < lits.size(); ++i) {
        bool truth = space_->one_truth(t, i);
        int ti = tracked_index(lits[i].pred);
        if (truth && ti >= 0)
          exps[ti] += 1;
        else
          coeff *= truth ? gp_->weights.positive(lits[i].pred) : gp_->weights.negative(lits[i].pred);
      }
      slot = SymbolicWeight::monomial(std::move(exps), std::move(coeff));
    }
    return *slot;
  }

  const SymbolicWeight& table_weight(TwoTableId t) {
    std::scoped_lock lock(weights_mutex_);
    auto& slot = table_weights_[t];
    if (!slot.has_value()) {
      SymbolicWeight::Exponents exps(tracked_.size(), 0);
      Rational coeff(1);
      const auto& lits = space_->two_literals();
      for (size_t i = 0; i < lits.size(); ++i) {
        bool truth = space_->two_truth(t, i);
        int ti = tracked_index(lits[i].pred);
        if (truth && ti >= 0)
          exps[ti] += 1;
        else
          coeff *= truth ? gp_->weights.positive(lits[i].pred) : gp_->weights.negative(lits[i].pred);
      }
      slot = SymbolicWeight::monomial(std::move(exps), std::move(coeff));
    }
    return *slot;
  }

  Rational numeric_one_type_weight(OneTypeId t) { return one_type_weight(t).evaluate(tracked_values_); }

  const Rational& numeric_table_weight(TwoTableId t) {
    {
      std::scoped_lock lock(weights_mutex_);
      if (numeric_table_weights_[t] >= 0) return numeric_table_weights_[t];
    }
    Rational v = table_weight(t).evaluate(tracked_values_);  // weights are nonnegative
    std::scoped_lock lock(weights_mutex_);
    if (numeric_table_weights_[t] < 0) numeric_table_weights_[t] = std::move(v);
    return numeric_table_weights_[t];
  }

  // Positive tracked-atom counts contributed by a 1-type / 2-table.
  std::vector<uint32_t> one_type_exponents(OneTypeId t) {
    const auto& w = one_type_weight(t);
    if (w.is_zero()) return std::vector<uint32_t>(tracked_.size(), 0);
    return w.terms().begin()->first;
  }

  std::vector<uint32_t> table_exponents(TwoTableId t) {
    const auto& w = table_weight(t);
    if (w.is_zero()) return std::vector<uint32_t>(tracked_.size(), 0);
    return w.terms().begin()->first;
  }

  const std::vector<TwoTableId>& coherent_tables(OneTypeId tau_a, OneTypeId tau_b) {
    std::scoped_lock lock(coherent_mutex_);
    auto key = std::make_pair(tau_a, tau_b);
    auto it = coherent_cache_.find(key);
    if (it != coherent_cache_.end()) return it->second;
    std::vector<TwoTableId> tables;
    for (TwoTableId pi = 0; pi < space_->num_two_tables(); ++pi)
      if (coherent(gp_->matrix, *space_, tau_a, tau_b, pi, nullary_fn_)) tables.push_back(pi);
    return coherent_cache_.emplace(key, std::move(tables)).first->second;
  }

  // Sum over 2-tables coherent with the pair that leave every assumed-violated
  // obligation unwitnessed: no R_k(x,y) for k violated on the left, no
  // R_k(y,x) for k violated on the right.
  SymbolicWeight pair_weight(const SignedCell& a, const SignedCell& b) {
    std::scoped_lock lock(pair_mutex_);
    std::array<uint32_t, 4> key{a.cell.one_type, a.violated, b.cell.one_type, b.violated};
    auto it = pair_cache_.find(key);
    if (it != pair_cache_.end()) return it->second;
    SymbolicWeight sum = SymbolicWeight::zero(tracked_.size());
    for (TwoTableId pi : coherent_tables(a.cell.one_type, b.cell.one_type)) {
      bool excluded = false;
      for (size_t k = 0; k < gp_->exist_preds.size() && !excluded; ++k) {
        bool va = a.violated & (BlockMask(1) << k);
        bool vb = b.violated & (BlockMask(1) << k);
        if (va && space_->table_holds(pi, gp_->exist_preds[k], /*forward=*/true)) excluded = true;
        if (vb && space_->table_holds(pi, gp_->exist_preds[k], /*forward=*/false)) excluded = true;
      }
      if (!excluded) sum += table_weight(pi);
    }
    pair_cache_.emplace(key, sum);
    return sum;
  }

  // Powers of pair and 1-type weights recur across configurations with the
  // same base; caching them trims the dominant big-rational work in w_n.
  const SymbolicWeight& pair_weight_pow(const SignedCell& a, const SignedCell& b, unsigned long e) {
    std::array<uint32_t, 4> base{a.cell.one_type, a.violated, b.cell.one_type, b.violated};
    std::scoped_lock lock(pow_mutex_);
    auto key = std::make_pair(base, e);
    auto it = pair_pow_cache_.find(key);
    if (it != pair_pow_cache_.end()) return it->second;
    SymbolicWeight value = pair_weight(a, b).pow(e);
    return pair_pow_cache_.emplace(key, std::move(value)).first->second;
  }

  const SymbolicWeight& one_type_weight_pow(OneTypeId t, unsigned long e) {
    std::scoped_lock lock(pow_mutex_);
    auto key = std::make_pair(t, e);
    auto it = one_pow_cache_.find(key);
    if (it != one_pow_cache_.end()) return it->second;
    SymbolicWeight value = one_type_weight(t).pow(e);
    return one_pow_cache_.emplace(key, std::move(value)).first->second;
  }

  // Violated subsets available to a cell: the 1-type must make R_k(x,x) false
  // for every assumed-unwitnessed k (otherwise the element witnesses itself).
  std::vector<BlockMask> violated_choices(CellType cell) const {
    std::vector<BlockMask> out;
    BlockMask eligible = 0;
    for (size_t k = 0; k < gp_->exist_preds.size(); ++k) {
      if (!(cell.block & (BlockMask(1) << k))) continue;
      if (!space_->one_type_holds(cell.one_type, gp_->exist_preds[k], /*reflexive=*/true))
        eligible |= BlockMask(1) << k;
    }
    BlockMask sub = eligible;
    while (true) {  // enumerate submasks, empty set last then reversed
      out.push_back(sub);
      if (sub == 0) break;
      sub = (sub - 1) & eligible;
    }
    std::reverse(out.begin(), out.end());  // empty set first, stable order
    return out;
  }

  // W_n as a polynomial in the tracked predicates: inclusion-exclusion over
  // all ways of splitting each cell among its signed sub-cells.
  const SymbolicWeight& w_n_poly(const CellConfig& config) {
    {
      std::scoped_lock lock(wn_mutex_);
      auto it = wn_cache_.find(config);
      if (it != wn_cache_.end()) return it->second;
    }
    SymbolicWeight total = SymbolicWeight::zero(tracked_.size());
    bool all_valid = true;
    for (const auto& [cell, count] : config)
      if (!is_valid_one_type(cell.one_type)) all_valid = false;

    if (all_valid) {
      std::vector<CellType> cells;
      std::vector<uint32_t> counts;
      std::vector<std::vector<BlockMask>> choices;
      std::vector<ConfigurationSpace> spaces;
      for (const auto& [cell, count] : config) {
        cells.push_back(cell);
        counts.push_back(count);
        choices.push_back(violated_choices(cell));
        spaces.emplace_back(count, static_cast<uint32_t>(choices.back().size()));
      }
      product_configurations(spaces, [&](const std::vector<uint32_t>& flat) {
        // assemble the signed cells with nonzero counts for this split
        std::vector<SignedCell> signed_cells;
        std::vector<uint32_t> signed_counts;
        Integer coef(1);
        int sign = 1;
        size_t pos = 0;
        for (size_t i = 0; i < cells.size(); ++i) {
          std::vector<uint32_t> split(flat.begin() + pos, flat.begin() + pos + choices[i].size());
          pos += choices[i].size();
          coef *= multinomial(split);
          for (size_t j = 0; j < split.size(); ++j) {
            if (split[j] == 0) continue;
            SignedCell sc{cells[i], choices[i][j]};
            if (sc.sign() < 0 && split[j] % 2 == 1) sign = -sign;
            signed_cells.push_back(sc);
            signed_counts.push_back(split[j]);
          }
        }
        SymbolicWeight term = SymbolicWeight::constant(tracked_.size(), Rational(sign) * coef);
        for (size_t i = 0; i < signed_cells.size() && !term.is_zero(); ++i) {
          term *= one_type_weight_pow(signed_cells[i].cell.one_type, signed_counts[i]);
          for (size_t j = i; j < signed_cells.size() && !term.is_zero(); ++j) {
            unsigned long e = (i == j)
                                  ? static_cast<unsigned long>(signed_counts[i]) * (signed_counts[i] - 1) / 2
                                  : static_cast<unsigned long>(signed_counts[i]) * signed_counts[j];
            if (e == 0) continue;
            term *= pair_weight_pow(signed_cells[i], signed_cells[j], e);
          }
        }
        total += term;
      });
    }
    std::scoped_lock lock(wn_mutex_);
    return wn_cache_.emplace(config, std::move(total)).first->second;
  }

  // W_n with real weights substituted (no constraint filtering).
  Rational w_n(const CellConfig& config) { return w_n_poly(config).evaluate(tracked_values_); }

  // W_{n,Upsilon}: symbolic W_n filtered by the constraints at the given
  // residual thresholds, then evaluated.
  Rational w_n_cc(const CellConfig& config, const std::vector<int64_t>& thresholds) {
    const SymbolicWeight& poly = w_n_poly(config);
    if (constraints_.trivial()) return poly.evaluate(tracked_values_);
    return poly.filtered_sum(tracked_values_, [&](const std::vector<uint32_t>& exps) {
      return constraints_.satisfied(exps, thresholds);
    });
  }

  // Weight of the nullary assignment this context is conditioned on.
  Rational sigma_weight() const {
    Rational out(1);
    const auto& names = space_->nullary_predicates();
    for (size_t i = 0; i < names.size(); ++i)
      out *= sigma_[i] ? gp_->weights.positive(names[i]) : gp_->weights.negative(names[i]);
    return out;
  }

  // Tracked-atom counts contributed by the nullary assignment.
  std::vector<uint32_t> sigma_exponents() const {
    std::vector<uint32_t> out(tracked_.size(), 0);
    const auto& names = space_->nullary_predicates();
    for (size_t i = 0; i < names.size(); ++i) {
      int ti = tracked_index(names[i]);
      if (ti >= 0 && sigma_[i]) out[ti] += 1;
    }
    return out;
  }

 private:
  const GeneralProblem* gp_;
  const TypeSpace* space_;
  std::vector<bool> sigma_;
  std::vector<std::string> tracked_;
  std::vector<Rational> tracked_values_;
  std::function<bool(const std::string&)> nullary_fn_;
  CompiledConstraints constraints_;
  std::vector<OneTypeId> valid_one_types_;

  std::mutex weights_mutex_;
  std::vector<std::optional<SymbolicWeight>> one_type_weights_;
  std::vector<std::optional<SymbolicWeight>> table_weights_;
  std::vector<Rational> numeric_table_weights_;

  std::mutex coherent_mutex_;
  std::map<std::pair<OneTypeId, OneTypeId>, std::vector<TwoTableId>> coherent_cache_;
  std::mutex pair_mutex_;
  std::map<std::array<uint32_t, 4>, SymbolicWeight> pair_cache_;
  std::mutex pow_mutex_;
  std::map<std::pair<std::array<uint32_t, 4>, unsigned long>, SymbolicWeight> pair_pow_cache_;
  std::map<std::pair<OneTypeId, unsigned long>, SymbolicWeight> one_pow_cache_;
  std::mutex wn_mutex_;
  std::map<CellConfig, SymbolicWeight> wn_cache_;
};

// Shared state for one normalized problem: the type space plus one counting
// context per assignment of the nullary atoms.
class ProblemContext {
 public:
  explicit ProblemContext(GeneralProblem gp, const std::vector<std::string>& extra_tracked = {})
      : gp_(std::move(gp)), space_(gp_.vocabulary) {
    std::set<std::string> tracked_set(extra_tracked.begin(), extra_tracked.end());
    std::function<void(const FormulaPtr&)> walk = [&](const FormulaPtr& f) {
      if (f->kind == Formula::Kind::CardinalityAtom) tracked_set.insert(f->predicate);
      for (const auto& c : f->children) walk(c);
    };
    walk(gp_.constraints);
    tracked_.assign(tracked_set.begin(), tracked_set.end());

    size_t z = space_.nullary_predicates().size();
    if (z > 12) throw std::invalid_argument("too many nullary predicates");
    for (uint64_t bits = 0; bits < (uint64_t(1) << z); ++bits) {
      std::vector<bool> sigma(z);
      for (size_t i = 0; i < z; ++i) sigma[i] = (bits >> i) & 1;
      branches_.push_back(std::make_unique<CountContext>(gp_, space_, std::move(sigma), tracked_));
    }
  }

  const GeneralProblem& problem() const { return gp_; }
  const TypeSpace& space() const { return space_; }
  const std::vector<std::string>& tracked() const { return tracked_; }
  size_t num_branches() const { return branches_.size(); }
  CountContext& branch(size_t i) { return *branches_[i]; }

  // Per-block-type element counts of the general problem.
  std::map<BlockMask, uint32_t> block_groups() const {
    std::map<BlockMask, uint32_t> out;
    for (BlockMask b : gp_.blocks) out[b] += 1;
    return out;
  }

  // Enumerates every cell configuration of the blockwise product space over
  // valid 1-types; fn(config, number_of_partitions).
  template <typename Fn>
  void for_each_configuration(CountContext& ctx, Fn&& fn) const {
    auto groups = block_groups();
    const auto& valid = ctx.valid_one_types();
    std::vector<BlockMask> group_blocks;
    std::vector<ConfigurationSpace> spaces;
    for (const auto& [block, count] : groups) {
      group_blocks.push_back(block);
      spaces.emplace_back(count, static_cast<uint32_t>(valid.size()));
    }
    product_configurations(spaces, [&](const std::vector<uint32_t>& flat) {
      CellConfig config;
      Integer partitions(1);
      size_t pos = 0;
      for (size_t g = 0; g < group_blocks.size(); ++g) {
        std::vector<uint32_t> slice(flat.begin() + pos, flat.begin() + pos + valid.size());
        pos += valid.size();
        partitions *= multinomial(slice);
        for (size_t j = 0; j < valid.size(); ++j)
          if (slice[j] > 0) config_add(config, {group_blocks[g], valid[j]}, slice[j]);
      }
      fn(const_cast<const CellConfig&>(config), partitions);
    });
  }

  // Total weight of one nullary branch (without the sigma factor), i.e. the
  // top-level WFOMC of Gamma_hat and Upsilon conditional on sigma.
  Rational branch_total(size_t branch_index) {
    CountContext& ctx = *branches_[branch_index];
    auto thresholds = residual_after_sigma(ctx);
    Rational total(0);
    for_each_configuration(ctx, [&](const CellConfig& config, const Integer& partitions) {
      total += ctx.w_n_cc(config, thresholds) * Rational(partitions);
    });
    return total;
  }

  // Thresholds after committing the nullary assignment.
  std::vector<int64_t> residual_after_sigma(CountContext& ctx) const {
    auto thresholds = ctx.constraints().initial_thresholds();
    auto committed = ctx.sigma_exponents();
    const auto& atoms = ctx.constraints().atoms();
    for (size_t i = 0; i < atoms.size(); ++i)
      thresholds[i] -= committed[atoms[i].tracked_index];
    return thresholds;
  }

 private:
  GeneralProblem gp_;
  TypeSpace space_;
  std::vector<std::string> tracked_;
  std::vector<std::unique_ptr<CountContext>> branches_;
};

// WFOMC of the normalized problem: the sum over nullary assignments and cell
// configurations of W_{n,Upsilon} times the number of partitions realizing
// each configuration.
inline Rational wfomc_total(ProblemContext& ctx) {
  Rational total(0);
  for (size_t b = 0; b < ctx.num_branches(); ++b)
    total += ctx.branch(b).sigma_weight() * ctx.branch_total(b);
  return total;
}

inline Rational wfomc_total(const GeneralProblem& gp) {
  ProblemContext ctx(gp);
  return wfomc_total(ctx);
}

}  // namespace wfoms
