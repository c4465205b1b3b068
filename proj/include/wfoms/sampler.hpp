#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wfoms/evaluate.hpp"
#include "wfoms/normalizer.hpp"
#include "wfoms/parser.hpp"
#include "wfoms/rng.hpp"
#include "wfoms/wfomc.hpp"

namespace wfoms {

struct UnsatisfiableError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An exactness invariant broke; any occurrence is a bug, not an input error.
struct SamplerInvariantError : std::logic_error {
  using std::logic_error::logic_error;
};

struct SampleOptions {
  bool validate = false;
  bool exists_projection = false;
};

struct SampleResult {
  Structure model;          // projected onto the user-facing output vocabulary
  Structure problem_model;  // projected onto the parsed problem's vocabulary
  Structure reduced;        // over the full normalized vocabulary
  Rational probability;     // exact sampling probability, as a rational
};

namespace detail {

inline void assert_conservation(const std::vector<Rational>& candidates, const Rational& expected,
                                const char* where) {
  Rational sum(0);
  for (const auto& c : candidates) sum += c;
  if (sum != expected)
    throw SamplerInvariantError(std::string("conservation violated in ") + where + ": candidates sum to " +
                                sum.get_str() + ", expected " + expected.get_str());
}

}  // namespace detail

// Validity check for a tentative 2-table configuration: every used table must
// be coherent with its cell, every obligation of e_t needs a forward witness,
// and (for conjunctive constraints) no upper-bounded residual may go negative.
inline bool ex_sat(CountContext& ctx, OneTypeId tau_t, BlockMask beta_t,
                   const std::vector<CellType>& cells,
                   const std::vector<std::vector<TwoTableId>>& tables_per_cell,
                   const std::vector<std::vector<uint32_t>>& counts_per_cell,
                   const std::vector<int64_t>& reduced_thresholds) {
  const auto& exist_preds = ctx.problem().exist_preds;
  for (size_t c = 0; c < cells.size(); ++c) {
    const auto& coherent_list = ctx.coherent_tables(tau_t, cells[c].one_type);
    for (size_t a = 0; a < tables_per_cell[c].size(); ++a) {
      if (counts_per_cell[c][a] == 0) continue;
      if (!std::binary_search(coherent_list.begin(), coherent_list.end(), tables_per_cell[c][a]))
        return false;
    }
  }
  for (size_t k = 0; k < exist_preds.size(); ++k) {
    if (!(beta_t & (BlockMask(1) << k))) continue;
    // R_k(t,t) in the 1-type already discharges the obligation
    bool witnessed = ctx.space().one_type_holds(tau_t, exist_preds[k], /*reflexive=*/true);
    for (size_t c = 0; c < cells.size() && !witnessed; ++c)
      for (size_t a = 0; a < tables_per_cell[c].size() && !witnessed; ++a)
        if (counts_per_cell[c][a] > 0 &&
            ctx.space().table_holds(tables_per_cell[c][a], exist_preds[k], /*forward=*/true))
          witnessed = true;
    if (!witnessed) return false;
  }
  if (!ctx.constraints().trivial() && ctx.constraints().pure_conjunction()) {
    const auto& atoms = ctx.constraints().atoms();
    for (size_t i = 0; i < atoms.size(); ++i) {
      // lower-bounded atoms stay satisfiable however far the count has gone
      if (atoms[i].cmp == Comparator::Ge || atoms[i].cmp == Comparator::Gt) continue;
      if (reduced_thresholds[i] < 0) return false;
    }
  }
  return true;
}

// The weighted model sampler: normalization, cell-configuration sampling and
// domain-recursive 2-table sampling, with an exact probability audit.
class Wms {
 public:
  explicit Wms(Problem problem, SampleOptions options = {})
      : problem_(std::move(problem)),
        options_(options),
        ctx_(std::make_unique<ProblemContext>(normalize(problem_))) {
    prepare();
  }

  const Problem& problem() const { return problem_; }
  const GeneralProblem& general() const { return ctx_->problem(); }
  ProblemContext& context() { return *ctx_; }
  const ReductionTrace& trace() const { return ctx_->problem().trace; }

  // WFOMC of the normalized (reduced) problem.
  const Rational& reduced_total() const { return total_; }

  // WFOMC of the source problem: the reduced total divided by the fiber
  // multiplicity of the recorded reductions.
  Rational source_total() const { return total_ / Rational(trace().fiber_multiplicity); }

  bool exists_projection_active() const { return exists_projection_; }

  SampleResult sample(Rng& rng) {
    if (total_ == 0) throw UnsatisfiableError("problem has no model of positive weight");
    SampleResult result;
    Rational audit(1);

    // nullary assignment branch
    std::vector<Rational> branch_weights;
    for (const auto& b : branches_) branch_weights.push_back(b.sigma_weight * b.total);
    size_t bidx = branches_.size() == 1 ? 0 : draw_discrete(branch_weights, rng);
    audit *= branch_weights[bidx] / total_;
    Branch& branch = branches_[bidx];
    CountContext& ctx = ctx_->branch(bidx);

    Structure reduced(general().domain);
    const auto& nullary = ctx_->space().nullary_predicates();
    for (size_t i = 0; i < nullary.size(); ++i)
      if (ctx.sigma()[i]) reduced.insert(nullary[i], {});

    // Phase 1: draw a cell configuration and partition the blocks.
    std::vector<CellType> cell_of(general().domain.size());
    sample_one_types(branch, rng, audit, cell_of);
    for (uint32_t e = 0; e < general().domain.size(); ++e) {
      ground_one_type(reduced, cell_of[e].one_type, e);
      // obligations already witnessed by R_k(e,e) are discharged up front
      for (size_t k = 0; k < general().exist_preds.size(); ++k)
        if ((cell_of[e].block & (BlockMask(1) << k)) &&
            ctx_->space().one_type_holds(cell_of[e].one_type, general().exist_preds[k], true))
          cell_of[e].block &= ~(BlockMask(1) << k);
    }

    // Phase 2: domain recursion over 2-table configurations.
    std::vector<uint32_t> remaining(general().domain.size());
    for (uint32_t e = 0; e < remaining.size(); ++e) remaining[e] = e;
    std::vector<int64_t> thresholds = ctx_->residual_after_sigma(ctx);
    if (exists_projection_)
      dr_loop_exists_projection(ctx, rng, audit, reduced, remaining, cell_of);
    else
      dr_loop(ctx, rng, audit, reduced, remaining, cell_of, thresholds);

    std::set<std::string> skeleton;
    for (const auto& p : trace().skeleton) skeleton.insert(p.name);
    std::set<std::string> output;
    for (const auto& p : problem_.output_preds()) output.insert(p.name);
    result.problem_model = reduced.project(skeleton);
    result.model = reduced.project(output);
    result.reduced = std::move(reduced);
    result.probability = audit * Rational(trace().fiber_multiplicity);

    if (options_.validate) {
      if (!evaluate(problem_.sentence, result.problem_model))
        throw SamplerInvariantError("sampled structure does not satisfy the sentence");
      if (!evaluate(problem_.constraints, result.problem_model))
        throw SamplerInvariantError("sampled structure violates the constraints");
    }
    return result;
  }

 private:
  struct OneTypeCandidate {
    CellConfig config;
    Integer partitions;
    Rational weight;  // W_{n,Upsilon}
  };

  struct Branch {
    Rational sigma_weight;
    std::vector<OneTypeCandidate> candidates;
    Rational total;  // sum of weight * partitions
  };

  void prepare() {
    total_ = 0;
    for (size_t b = 0; b < ctx_->num_branches(); ++b) {
      CountContext& ctx = ctx_->branch(b);
      Branch branch;
      branch.sigma_weight = ctx.sigma_weight();
      auto thresholds = ctx_->residual_after_sigma(ctx);
      branch.total = 0;
      ctx_->for_each_configuration(ctx, [&](const CellConfig& config, const Integer& partitions) {
        Rational w = ctx.w_n_cc(config, thresholds);
        if (w == 0) return;
        branch.total += w * Rational(partitions);
        branch.candidates.push_back({config, partitions, std::move(w)});
      });
      total_ += branch.sigma_weight * branch.total;
      branches_.push_back(std::move(branch));
    }
    // the existential-projection shortcut only applies without cardinality
    // constraints; fall back silently otherwise
    exists_projection_ = options_.exists_projection && ctx_->tracked().empty() &&
                         !general().exist_preds.empty();
  }

  void ground_one_type(Structure& s, OneTypeId tau, uint32_t element) const {
    const auto& lits = ctx_->space().one_literals();
    for (size_t i = 0; i < lits.size(); ++i) {
      if (!ctx_->space().one_truth(tau, i)) continue;
      if (lits[i].reflexive)
        s.insert(lits[i].pred, {element, element});
      else
        s.insert(lits[i].pred, {element});
    }
  }

  void ground_table(Structure& s, TwoTableId pi, uint32_t et, uint32_t e) const {
    const auto& lits = ctx_->space().two_literals();
    for (size_t i = 0; i < lits.size(); ++i) {
      if (!ctx_->space().two_truth(pi, i)) continue;
      if (lits[i].forward)
        s.insert(lits[i].pred, {et, e});
      else
        s.insert(lits[i].pred, {e, et});
    }
  }

  // Uniform partition of `members` into slots of the given sizes; returns the
  // member list per slot and multiplies the audit by the partition
  // probability 1/multinomial.
  std::vector<std::vector<uint32_t>> partition_uniformly(std::vector<uint32_t> members,
                                                         const std::vector<uint32_t>& sizes, Rng& rng,
                                                         Rational& audit) const {
    rng.shuffle(members);
    std::vector<std::vector<uint32_t>> out(sizes.size());
    size_t pos = 0;
    for (size_t i = 0; i < sizes.size(); ++i) {
      out[i].assign(members.begin() + pos, members.begin() + pos + sizes[i]);
      pos += sizes[i];
    }
    audit /= Rational(multinomial(sizes));
    return out;
  }

  // Algorithm: enumerate the blockwise product of configuration spaces, draw
  // one configuration exactly, then partition each block uniformly.
  void sample_one_types(Branch& branch, Rng& rng, Rational& audit,
                        std::vector<CellType>& cell_of) {
    std::vector<Rational> weights;
    weights.reserve(branch.candidates.size());
    for (const auto& cand : branch.candidates) weights.push_back(cand.weight * Rational(cand.partitions));
    detail::assert_conservation(weights, branch.total, "sample_one_types");
    if (branch.total == 0) throw UnsatisfiableError("zero total weight in 1-type sampling");
    size_t pick = draw_discrete(weights, rng);
    audit *= weights[pick] / branch.total;
    const CellConfig& config = branch.candidates[pick].config;

    // group elements and the drawn configuration by block
    std::map<BlockMask, std::vector<uint32_t>> members;
    for (uint32_t e = 0; e < general().domain.size(); ++e)
      members[general().blocks[e]].push_back(e);
    for (auto& [block, elems] : members) {
      std::vector<uint32_t> sizes;
      std::vector<OneTypeId> taus;
      for (const auto& [cell, count] : config) {
        if (cell.block != block) continue;
        sizes.push_back(count);
        taus.push_back(cell.one_type);
      }
      auto parts = partition_uniformly(elems, sizes, rng, audit);
      for (size_t i = 0; i < parts.size(); ++i)
        for (uint32_t e : parts[i]) cell_of[e] = {block, taus[i]};
    }
  }

  CellConfig config_of(const std::vector<uint32_t>& elements,
                       const std::vector<CellType>& cell_of) const {
    CellConfig out;
    for (uint32_t e : elements) config_add(out, cell_of[e], 1);
    return out;
  }

  // Picks the element with the most open obligations (ties by domain order).
  uint32_t select_element(const std::vector<uint32_t>& remaining,
                          const std::vector<CellType>& cell_of) const {
    uint32_t best = remaining.front();
    int best_count = std::popcount(cell_of[best].block);
    for (uint32_t e : remaining) {
      int c = std::popcount(cell_of[e].block);
      if (c > best_count) {
        best = e;
        best_count = c;
      }
    }
    return best;
  }

  void dr_loop(CountContext& ctx, Rng& rng, Rational& audit, Structure& reduced,
               std::vector<uint32_t>& remaining, std::vector<CellType>& cell_of,
               std::vector<int64_t>& thresholds) {
    const auto& exist_preds = general().exist_preds;
    while (remaining.size() > 1) {
      bool all_clear = true;
      for (uint32_t e : remaining)
        if (cell_of[e].block != 0) all_clear = false;
      if (all_clear && ctx.constraints().trivial()) {
        ufo2_sample_two_tables(ctx, rng, audit, reduced, remaining, cell_of);
        return;
      }
      // with live cardinality constraints the per-pair factorization breaks;
      // keep recursing on configurations even when every block is clear

      uint32_t et = select_element(remaining, cell_of);
      OneTypeId tau_t = cell_of[et].one_type;
      BlockMask beta_t = cell_of[et].block;

      CellConfig full_config = config_of(remaining, cell_of);
      Rational loop_total = ctx.w_n_cc(full_config, thresholds);
      if (loop_total == 0)
        throw SamplerInvariantError("zero-weight state reached in the domain recursion");

      std::vector<uint32_t> rest;
      for (uint32_t e : remaining)
        if (e != et) rest.push_back(e);

      // cells of the rest, in canonical order, with their members
      std::map<CellType, std::vector<uint32_t>> cell_members;
      for (uint32_t e : rest) cell_members[cell_of[e]].push_back(e);
      std::vector<CellType> cells;
      std::vector<std::vector<uint32_t>> members;
      std::vector<std::vector<TwoTableId>> allowed;
      std::vector<ConfigurationSpace> spaces;
      for (auto& [cell, elems] : cell_members) {
        cells.push_back(cell);
        members.push_back(elems);
        allowed.push_back(ctx.coherent_tables(tau_t, cell.one_type));
        spaces.emplace_back(static_cast<uint32_t>(elems.size()),
                            static_cast<uint32_t>(allowed.back().size()));
      }

      Rational tau_weight = ctx.numeric_one_type_weight(tau_t);
      auto tau_exps = ctx.one_type_exponents(tau_t);
      const auto& atoms = ctx.constraints().atoms();

      struct Candidate {
        std::vector<std::vector<uint32_t>> counts;  // per cell, per allowed table
        std::vector<int64_t> thresholds;
        Rational weight;
      };
      std::vector<Candidate> candidates;
      std::vector<Rational> weights;

      product_configurations(spaces, [&](const std::vector<uint32_t>& flat) {
        Candidate cand;
        size_t pos = 0;
        for (size_t c = 0; c < cells.size(); ++c) {
          cand.counts.emplace_back(flat.begin() + pos, flat.begin() + pos + allowed[c].size());
          pos += allowed[c].size();
        }
        // committed tracked atoms: e_t's 1-type plus all tables in A_t
        std::vector<uint32_t> committed = tau_exps;
        for (size_t c = 0; c < cells.size(); ++c)
          for (size_t a = 0; a < allowed[c].size(); ++a) {
            if (cand.counts[c][a] == 0) continue;
            auto exps = ctx.table_exponents(allowed[c][a]);
            for (size_t i = 0; i < exps.size(); ++i) committed[i] += exps[i] * cand.counts[c][a];
          }
        cand.thresholds = thresholds;
        for (size_t i = 0; i < atoms.size(); ++i)
          cand.thresholds[i] -= committed[atoms[i].tracked_index];

        if (!ex_sat(ctx, tau_t, beta_t, cells, allowed, cand.counts, cand.thresholds)) return;

        // reduced configuration via relaxation
        CellConfig next_config;
        for (size_t c = 0; c < cells.size(); ++c)
          for (size_t a = 0; a < allowed[c].size(); ++a) {
            if (cand.counts[c][a] == 0) continue;
            config_add(next_config, relax(ctx.space(), cells[c], allowed[c][a], exist_preds),
                       cand.counts[c][a]);
          }

        Rational w = ctx.w_n_cc(next_config, cand.thresholds);
        if (w == 0) return;
        w *= tau_weight;
        for (size_t c = 0; c < cells.size(); ++c) {
          w *= Rational(multinomial(cand.counts[c]));
          for (size_t a = 0; a < allowed[c].size(); ++a)
            if (cand.counts[c][a] > 0)
              w *= rat_pow(ctx.numeric_table_weight(allowed[c][a]), cand.counts[c][a]);
        }
        cand.weight = w;
        weights.push_back(std::move(w));
        candidates.push_back(std::move(cand));
      });

      detail::assert_conservation(weights, loop_total, "dr_sampler");
      size_t pick = draw_discrete(weights, rng);
      audit *= weights[pick] / loop_total;
      const Candidate& chosen = candidates[pick];

      // ground the chosen tables and relax the partners
      for (size_t c = 0; c < cells.size(); ++c) {
        auto parts = partition_uniformly(members[c], chosen.counts[c], rng, audit);
        for (size_t a = 0; a < allowed[c].size(); ++a) {
          for (uint32_t e : parts[a]) {
            ground_table(reduced, allowed[c][a], et, e);
            cell_of[e] = relax(ctx.space(), cell_of[e], allowed[c][a], exist_preds);
          }
        }
      }
      thresholds = chosen.thresholds;
      remaining = std::move(rest);
    }
  }

  // Fast path: with no open obligation and no live constraint the 2-tables
  // of distinct pairs are independent.
  void ufo2_sample_two_tables(CountContext& ctx, Rng& rng, Rational& audit, Structure& reduced,
                              const std::vector<uint32_t>& remaining,
                              const std::vector<CellType>& cell_of) {
    for (size_t i = 0; i < remaining.size(); ++i) {
      for (size_t j = i + 1; j < remaining.size(); ++j) {
        uint32_t a = remaining[i], b = remaining[j];
        const auto& tables = ctx.coherent_tables(cell_of[a].one_type, cell_of[b].one_type);
        if (tables.empty())
          throw SamplerInvariantError("pair with no coherent 2-table");
        std::vector<Rational> weights;
        Rational sum(0);
        for (TwoTableId t : tables) {
          weights.push_back(ctx.numeric_table_weight(t));
          sum += weights.back();
        }
        if (sum == 0) throw SamplerInvariantError("pair with zero-weight 2-table options");
        size_t pick = draw_discrete(weights, rng);
        audit *= weights[pick] / sum;
        ground_table(reduced, tables[pick], a, b);
      }
    }
  }

  // A.5-style two-stage variant: recurse over the existential sub-vocabulary
  // first (grouping 2-tables by their restriction to the R_k atoms), then
  // complete every committed pair independently.
  void dr_loop_exists_projection(CountContext& ctx, Rng& rng, Rational& audit, Structure& reduced,
                                 std::vector<uint32_t>& remaining, std::vector<CellType>& cell_of) {
    const auto& exist_preds = general().exist_preds;
    const size_t m = exist_preds.size();

    // class of a table: its R_k forward/backward bits
    auto table_class = [&](TwoTableId pi) {
      uint32_t mask = 0;
      for (size_t k = 0; k < m; ++k) {
        if (ctx.space().table_holds(pi, exist_preds[k], true)) mask |= 1u << (2 * k);
        if (ctx.space().table_holds(pi, exist_preds[k], false)) mask |= 1u << (2 * k + 1);
      }
      return mask;
    };

    struct PendingPair {
      uint32_t et, e;
      OneTypeId tau_t, tau_e;
      uint32_t class_mask;
    };
    std::vector<PendingPair> pending;

    struct TableClass {
      uint32_t mask;
      std::vector<TwoTableId> tables;
      Rational weight;  // sum of member weights
    };
    auto classes_for = [&](OneTypeId tau_t, OneTypeId tau_e) {
      std::map<uint32_t, TableClass> grouped;
      for (TwoTableId t : ctx.coherent_tables(tau_t, tau_e)) {
        auto& cls = grouped[table_class(t)];
        cls.mask = table_class(t);
        cls.tables.push_back(t);
        cls.weight += ctx.numeric_table_weight(t);
      }
      std::vector<TableClass> out;
      for (auto& [mask, cls] : grouped) out.push_back(std::move(cls));
      return out;
    };

    // a class relaxes and witnesses exactly like any member table would
    auto relax_by_class = [&](CellType cell, uint32_t mask) {
      BlockMask block = cell.block;
      for (size_t k = 0; k < m; ++k)
        if (mask & (1u << (2 * k + 1))) block &= ~(BlockMask(1) << k);
      return CellType{block, cell.one_type};
    };

    while (remaining.size() > 1) {
      bool all_clear = true;
      for (uint32_t e : remaining)
        if (cell_of[e].block != 0) all_clear = false;
      if (all_clear) {
        ufo2_sample_two_tables(ctx, rng, audit, reduced, remaining, cell_of);
        break;
      }

      uint32_t et = select_element(remaining, cell_of);
      OneTypeId tau_t = cell_of[et].one_type;
      BlockMask beta_t = cell_of[et].block;

      CellConfig full_config = config_of(remaining, cell_of);
      Rational loop_total = ctx.w_n(full_config);
      if (loop_total == 0)
        throw SamplerInvariantError("zero-weight state reached in the domain recursion");

      std::vector<uint32_t> rest;
      for (uint32_t e : remaining)
        if (e != et) rest.push_back(e);
      std::map<CellType, std::vector<uint32_t>> cell_members;
      for (uint32_t e : rest) cell_members[cell_of[e]].push_back(e);

      std::vector<CellType> cells;
      std::vector<std::vector<uint32_t>> members;
      std::vector<std::vector<TableClass>> allowed;
      std::vector<ConfigurationSpace> spaces;
      for (auto& [cell, elems] : cell_members) {
        cells.push_back(cell);
        members.push_back(elems);
        allowed.push_back(classes_for(tau_t, cell.one_type));
        spaces.emplace_back(static_cast<uint32_t>(elems.size()),
                            static_cast<uint32_t>(allowed.back().size()));
      }

      Rational tau_weight = ctx.numeric_one_type_weight(tau_t);

      struct Candidate {
        std::vector<std::vector<uint32_t>> counts;
        Rational weight;
      };
      std::vector<Candidate> candidates;
      std::vector<Rational> weights;

      product_configurations(spaces, [&](const std::vector<uint32_t>& flat) {
        Candidate cand;
        size_t pos = 0;
        for (size_t c = 0; c < cells.size(); ++c) {
          cand.counts.emplace_back(flat.begin() + pos, flat.begin() + pos + allowed[c].size());
          pos += allowed[c].size();
        }
        // every obligation of e_t needs a forward witness in some class
        for (size_t k = 0; k < m; ++k) {
          if (!(beta_t & (BlockMask(1) << k))) continue;
          bool witnessed = ctx.space().one_type_holds(tau_t, exist_preds[k], /*reflexive=*/true);
          for (size_t c = 0; c < cells.size() && !witnessed; ++c)
            for (size_t a = 0; a < allowed[c].size() && !witnessed; ++a)
              if (cand.counts[c][a] > 0 && (allowed[c][a].mask & (1u << (2 * k)))) witnessed = true;
          if (!witnessed) return;
        }
        CellConfig next_config;
        for (size_t c = 0; c < cells.size(); ++c)
          for (size_t a = 0; a < allowed[c].size(); ++a)
            if (cand.counts[c][a] > 0)
              config_add(next_config, relax_by_class(cells[c], allowed[c][a].mask), cand.counts[c][a]);
        Rational w = ctx.w_n(next_config);
        if (w == 0) return;
        w *= tau_weight;
        for (size_t c = 0; c < cells.size(); ++c) {
          w *= Rational(multinomial(cand.counts[c]));
          for (size_t a = 0; a < allowed[c].size(); ++a)
            if (cand.counts[c][a] > 0) w *= rat_pow(allowed[c][a].weight, cand.counts[c][a]);
        }
        cand.weight = w;
        weights.push_back(std::move(w));
        candidates.push_back(std::move(cand));
      });

      detail::assert_conservation(weights, loop_total, "dr_sampler(exists-projection)");
      size_t pick = draw_discrete(weights, rng);
      audit *= weights[pick] / loop_total;
      const Candidate& chosen = candidates[pick];

      for (size_t c = 0; c < cells.size(); ++c) {
        auto parts = partition_uniformly(members[c], chosen.counts[c], rng, audit);
        for (size_t a = 0; a < allowed[c].size(); ++a) {
          for (uint32_t e : parts[a]) {
            // commit only the R_k literals now; the rest of the table later
            for (size_t k = 0; k < m; ++k) {
              if (allowed[c][a].mask & (1u << (2 * k))) reduced.insert(exist_preds[k], {et, e});
              if (allowed[c][a].mask & (1u << (2 * k + 1))) reduced.insert(exist_preds[k], {e, et});
            }
            pending.push_back({et, e, tau_t, cell_of[e].one_type, allowed[c][a].mask});
            cell_of[e] = relax_by_class(cell_of[e], allowed[c][a].mask);
          }
        }
      }
      remaining = std::move(rest);
    }

    // complete the committed pairs: independent draws within each class
    for (const auto& p : pending) {
      std::vector<TwoTableId> options;
      std::vector<Rational> weights;
      Rational sum(0);
      for (TwoTableId t : ctx.coherent_tables(p.tau_t, p.tau_e)) {
        if (table_class(t) != p.class_mask) continue;
        options.push_back(t);
        weights.push_back(ctx.numeric_table_weight(t));
        sum += weights.back();
      }
      if (sum == 0) throw SamplerInvariantError("committed pair with no completion");
      size_t pick = draw_discrete(weights, rng);
      audit *= weights[pick] / sum;
      // the R_k atoms are already in place; insert is idempotent
      ground_table(reduced, options[pick], p.et, p.e);
    }
  }

  Problem problem_;
  SampleOptions options_;
  std::unique_ptr<ProblemContext> ctx_;
  std::vector<Branch> branches_;
  Rational total_ = 0;
  bool exists_projection_ = false;
};

// One-shot convenience: normalize, sample once, return the model.
inline SampleResult wms(const Problem& problem, Rng& rng, SampleOptions options = {}) {
  Wms sampler(problem, options);
  return sampler.sample(rng);
}

}  // namespace wfoms
