#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "wfoms/evaluate.hpp"
#include "wfoms/normalizer.hpp"
#include "wfoms/parser.hpp"
#include "wfoms/types.hpp"
#include "wfoms/wfomc.hpp"

namespace wfoms {

struct OracleBoundError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace bruteforce {

// Canonical ground-atom order: predicates sorted by name, argument tuples in
// row-major order over the element list.
class AtomTable {
 public:
  AtomTable(const std::vector<Predicate>& vocab, const std::vector<uint32_t>& elements) {
    std::vector<Predicate> sorted = vocab;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& p : sorted) {
      uint64_t begin = atoms_.size();
      if (p.arity == 0) {
        atoms_.push_back({p.name, {}});
      } else if (p.arity == 1) {
        for (uint32_t a : elements) atoms_.push_back({p.name, {a}});
      } else {
        for (uint32_t a : elements)
          for (uint32_t b : elements) atoms_.push_back({p.name, {a, b}});
      }
      pred_range_[p.name] = {begin, atoms_.size()};
    }
    for (size_t i = 0; i < atoms_.size(); ++i) index_[atoms_[i]] = static_cast<uint32_t>(i);
  }

  size_t size() const { return atoms_.size(); }
  const GroundAtom& atom(size_t i) const { return atoms_[i]; }

  int index_of(const GroundAtom& a) const {
    auto it = index_.find(a);
    return it == index_.end() ? -1 : static_cast<int>(it->second);
  }

  std::pair<uint64_t, uint64_t> pred_range(const std::string& pred) const {
    auto it = pred_range_.find(pred);
    if (it == pred_range_.end()) throw std::invalid_argument("unknown predicate " + pred);
    return it->second;
  }

  uint64_t pred_mask(const std::string& pred) const {
    auto [b, e] = pred_range(pred);
    if (e >= 64) throw OracleBoundError("predicate mask beyond 64 atoms");
    uint64_t mask = 0;
    for (uint64_t i = b; i < e; ++i) mask |= uint64_t(1) << i;
    return mask;
  }

 private:
  std::vector<GroundAtom> atoms_;
  std::map<GroundAtom, uint32_t> index_;
  std::map<std::string, std::pair<uint64_t, uint64_t>> pred_range_;
};

// Grounded boolean circuit evaluated 64 assignments at a time; counting is
// done with threshold bit-planes.
class Circuit {
 public:
  enum class Op : uint8_t { Const, Atom, Not, And, Or, Implies, Iff, Count };

  explicit Circuit(const AtomTable& atoms) : atoms_(&atoms) {}

  uint32_t constant(bool v) { return intern({Op::Const, v ? 1u : 0u, Comparator::Eq, 0, {}}); }
  uint32_t atom(uint32_t index) { return intern({Op::Atom, index, Comparator::Eq, 0, {}}); }

  uint32_t negate(uint32_t a) {
    if (nodes_[a].op == Op::Const) return constant(nodes_[a].payload == 0);
    return intern({Op::Not, 0, Comparator::Eq, 0, {a}});
  }

  uint32_t gate(Op op, std::vector<uint32_t> inputs) {
    // constant folding keeps grounded sentences small
    if (op == Op::And || op == Op::Or) {
      bool absorbing = (op == Op::Or);
      std::vector<uint32_t> kept;
      for (uint32_t i : inputs) {
        if (nodes_[i].op == Op::Const) {
          bool v = nodes_[i].payload != 0;
          if (v == absorbing) return constant(absorbing);
          continue;
        }
        kept.push_back(i);
      }
      if (kept.empty()) return constant(!absorbing);
      if (kept.size() == 1) return kept[0];
      std::sort(kept.begin(), kept.end());
      kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
      if (kept.size() == 1) return kept[0];
      return intern({op, 0, Comparator::Eq, 0, std::move(kept)});
    }
    if (op == Op::Implies) {
      if (nodes_[inputs[0]].op == Op::Const)
        return nodes_[inputs[0]].payload ? inputs[1] : constant(true);
      if (nodes_[inputs[1]].op == Op::Const)
        return nodes_[inputs[1]].payload ? constant(true) : negate(inputs[0]);
      return intern({op, 0, Comparator::Eq, 0, std::move(inputs)});
    }
    if (op == Op::Iff) {
      if (nodes_[inputs[0]].op == Op::Const)
        return nodes_[inputs[0]].payload ? inputs[1] : negate(inputs[1]);
      if (nodes_[inputs[1]].op == Op::Const)
        return nodes_[inputs[1]].payload ? inputs[0] : negate(inputs[0]);
      return intern({op, 0, Comparator::Eq, 0, std::move(inputs)});
    }
    return intern({op, 0, Comparator::Eq, 0, std::move(inputs)});
  }

  uint32_t count(Comparator cmp, int64_t threshold, std::vector<uint32_t> inputs) {
    // fold constant inputs into the threshold
    std::vector<uint32_t> kept;
    int64_t q = threshold;
    for (uint32_t i : inputs) {
      if (nodes_[i].op == Op::Const) {
        if (nodes_[i].payload) --q;
        continue;
      }
      kept.push_back(i);
    }
    std::sort(kept.begin(), kept.end());
    int64_t L = static_cast<int64_t>(kept.size());
    // decide constants early where possible
    auto always = [&](bool v) { return constant(v); };
    switch (cmp) {
      case Comparator::Eq:
        if (q < 0 || q > L) return always(false);
        break;
      case Comparator::Le:
        if (q < 0) return always(false);
        if (q >= L) return always(true);
        break;
      case Comparator::Lt:
        if (q <= 0) return always(false);
        if (q > L) return always(true);
        break;
      case Comparator::Ge:
        if (q <= 0) return always(true);
        if (q > L) return always(false);
        break;
      case Comparator::Gt:
        if (q < 0) return always(true);
        if (q >= L) return always(false);
        break;
    }
    return intern({Op::Count, 0, cmp, q, std::move(kept)});
  }

  // Compiles a sentence over the given elements; `fixed` atoms become
  // constants, and cardinality thresholds can be overridden in DFS order of
  // the cardinality atoms via `thresholds`.
  uint32_t compile(const FormulaPtr& f, const std::vector<uint32_t>& elements,
                   const std::map<GroundAtom, bool>& fixed,
                   const std::vector<int64_t>* thresholds = nullptr) {
    size_t cursor = 0;
    return compile_rec(f, elements, fixed, {}, thresholds, cursor);
  }

  size_t num_nodes() const { return nodes_.size(); }

  // Evaluates all nodes over the current atom words.
  void evaluate(std::vector<uint64_t>& values, const std::vector<uint64_t>& atom_words) {
    values.resize(nodes_.size());
    for (size_t i = 0; i < nodes_.size(); ++i) {
      const Node& n = nodes_[i];
      switch (n.op) {
        case Op::Const:
          values[i] = n.payload ? ~uint64_t(0) : 0;
          break;
        case Op::Atom:
          values[i] = atom_words[n.payload];
          break;
        case Op::Not:
          values[i] = ~values[n.inputs[0]];
          break;
        case Op::And: {
          uint64_t v = ~uint64_t(0);
          for (uint32_t in : n.inputs) v &= values[in];
          values[i] = v;
          break;
        }
        case Op::Or: {
          uint64_t v = 0;
          for (uint32_t in : n.inputs) v |= values[in];
          values[i] = v;
          break;
        }
        case Op::Implies:
          values[i] = ~values[n.inputs[0]] | values[n.inputs[1]];
          break;
        case Op::Iff:
          values[i] = ~(values[n.inputs[0]] ^ values[n.inputs[1]]);
          break;
        case Op::Count: {
          int64_t L = static_cast<int64_t>(n.inputs.size());
          int64_t q = n.threshold;
          int64_t jmax = std::min<int64_t>(L, q + 1);
          planes_.assign(static_cast<size_t>(jmax) + 1, 0);
          planes_[0] = ~uint64_t(0);
          for (uint32_t in : n.inputs) {
            uint64_t w = values[in];
            for (int64_t j = jmax; j >= 1; --j) planes_[j] |= planes_[j - 1] & w;
          }
          auto at_least = [&](int64_t j) -> uint64_t {
            if (j <= 0) return ~uint64_t(0);
            if (j > jmax || j > L) return 0;
            return planes_[j];
          };
          switch (n.cmp) {
            case Comparator::Eq: values[i] = at_least(q) & ~at_least(q + 1); break;
            case Comparator::Le: values[i] = ~at_least(q + 1); break;
            case Comparator::Lt: values[i] = ~at_least(q); break;
            case Comparator::Ge: values[i] = at_least(q); break;
            case Comparator::Gt: values[i] = at_least(q + 1); break;
          }
          break;
        }
      }
    }
  }

 private:
  struct Node {
    Op op;
    uint32_t payload;  // const value or atom index
    Comparator cmp;
    int64_t threshold;
    std::vector<uint32_t> inputs;

    auto operator<=>(const Node&) const = default;
  };

  uint32_t intern(Node node) {
    auto it = dedup_.find(node);
    if (it != dedup_.end()) return it->second;
    uint32_t id = static_cast<uint32_t>(nodes_.size());
    dedup_.emplace(node, id);
    nodes_.push_back(std::move(node));
    return id;
  }

  uint32_t compile_rec(const FormulaPtr& f, const std::vector<uint32_t>& elements,
                       const std::map<GroundAtom, bool>& fixed,
                       std::map<std::string, uint32_t> binding,
                       const std::vector<int64_t>* thresholds, size_t& cursor) {
    switch (f->kind) {
      case Formula::Kind::Atom: {
        GroundAtom atom_key{f->predicate, {}};
        for (const auto& t : f->args) {
          if (t.is_variable()) {
            auto it = binding.find(t.text);
            if (it == binding.end()) throw std::invalid_argument("unbound variable " + t.text);
            atom_key.args.push_back(it->second);
          } else {
            atom_key.args.push_back(domain_index_(t.text));
          }
        }
        auto fx = fixed.find(atom_key);
        if (fx != fixed.end()) return constant(fx->second);
        int idx = atoms_->index_of(atom_key);
        if (idx < 0) throw std::invalid_argument("atom outside the ground table");
        return atom(static_cast<uint32_t>(idx));
      }
      case Formula::Kind::Not:
        return negate(compile_rec(f->children[0], elements, fixed, binding, thresholds, cursor));
      case Formula::Kind::Binary: {
        uint32_t a = compile_rec(f->children[0], elements, fixed, binding, thresholds, cursor);
        uint32_t b = compile_rec(f->children[1], elements, fixed, binding, thresholds, cursor);
        switch (f->op) {
          case Connective::And: return gate(Op::And, {a, b});
          case Connective::Or: return gate(Op::Or, {a, b});
          case Connective::Implies: return gate(Op::Implies, {a, b});
          case Connective::Iff: return gate(Op::Iff, {a, b});
        }
        throw std::logic_error("unreachable");
      }
      case Formula::Kind::Quantified: {
        std::vector<uint32_t> parts;
        parts.reserve(elements.size());
        for (uint32_t e : elements) {
          auto inner = binding;
          inner[f->var] = e;
          parts.push_back(compile_children_scoped(f->children[0], elements, fixed, inner, thresholds, cursor));
        }
        if (f->quant == QuantKind::Forall) return gate(Op::And, std::move(parts));
        if (f->quant == QuantKind::Exists) return gate(Op::Or, std::move(parts));
        return count(Comparator::Eq, f->count_k, std::move(parts));
      }
      case Formula::Kind::CardinalityAtom: {
        auto [b, e] = atoms_->pred_range(f->predicate);
        std::vector<uint32_t> inputs;
        for (uint64_t i = b; i < e; ++i) {
          auto fx = fixed.find(atoms_->atom(i));
          inputs.push_back(fx != fixed.end() ? constant(fx->second) : atom(static_cast<uint32_t>(i)));
        }
        int64_t q = f->threshold;
        if (thresholds) q = (*thresholds)[cursor];
        ++cursor;
        return count(f->cmp, q, std::move(inputs));
      }
      case Formula::Kind::BoolConst:
        return constant(f->value);
    }
    throw std::logic_error("unreachable");
  }

  uint32_t compile_children_scoped(const FormulaPtr& f, const std::vector<uint32_t>& elements,
                                   const std::map<GroundAtom, bool>& fixed,
                                   const std::map<std::string, uint32_t>& binding,
                                   const std::vector<int64_t>* thresholds, size_t& cursor) {
    return compile_rec(f, elements, fixed, binding, thresholds, cursor);
  }

 public:
  // Constants in formulas are resolved through this hook (set by the owner).
  std::function<uint32_t(const std::string&)> domain_index_ = [](const std::string& label) -> uint32_t {
    throw std::invalid_argument("constant " + label + " cannot be resolved here");
  };

 private:
  const AtomTable* atoms_;
  std::vector<Node> nodes_;
  std::map<Node, uint32_t> dedup_;
  std::vector<uint64_t> planes_;
};

inline uint64_t lane_pattern(size_t bit) {
  uint64_t v = 0;
  for (uint64_t lane = 0; lane < 64; ++lane)
    if ((lane >> bit) & 1) v |= uint64_t(1) << lane;
  return v;
}

// Enumerates all assignments of the free atoms, visiting every one that
// satisfies the root; fn receives the full assignment as a bit vector
// (bit i = truth of atom i, fixed atoms included).
template <typename Fn>
inline void enumerate_satisfying(Circuit& circuit, uint32_t root, size_t num_atoms,
                                 const std::vector<int>& atom_slots, uint64_t fixed_bits, Fn&& fn) {
  // atom_slots[i] >= 0: free atom with enumeration slot; -1: fixed
  size_t free_count = 0;
  for (int s : atom_slots)
    if (s >= 0) ++free_count;
  size_t lane_bits = std::min<size_t>(free_count, 6);
  size_t outer_bits = free_count - lane_bits;
  uint64_t lane_mask = (lane_bits >= 6) ? ~uint64_t(0)
                                        : ((uint64_t(1) << (uint64_t(1) << lane_bits)) - 1);

  std::vector<uint64_t> atom_words(num_atoms, 0);
  std::vector<uint64_t> values;
  for (uint64_t hi = 0; hi < (uint64_t(1) << outer_bits); ++hi) {
    for (size_t i = 0; i < num_atoms; ++i) {
      int slot = atom_slots[i];
      if (slot < 0) {
        atom_words[i] = (fixed_bits >> i) & 1 ? ~uint64_t(0) : 0;
      } else if (static_cast<size_t>(slot) < lane_bits) {
        atom_words[i] = lane_pattern(static_cast<size_t>(slot));
      } else {
        atom_words[i] = ((hi >> (slot - lane_bits)) & 1) ? ~uint64_t(0) : 0;
      }
    }
    circuit.evaluate(values, atom_words);
    uint64_t sat = values[root] & lane_mask;
    while (sat) {
      unsigned lane = static_cast<unsigned>(std::countr_zero(sat));
      sat &= sat - 1;
      // rebuild the assignment bits for this lane
      uint64_t assignment = fixed_bits;
      for (size_t i = 0; i < num_atoms; ++i) {
        int slot = atom_slots[i];
        if (slot < 0) continue;
        bool truth = static_cast<size_t>(slot) < lane_bits
                         ? ((lane >> slot) & 1)
                         : ((hi >> (slot - lane_bits)) & 1);
        if (truth)
          assignment |= uint64_t(1) << i;
        else
          assignment &= ~(uint64_t(1) << i);
      }
      fn(assignment);
    }
  }
}

}  // namespace bruteforce

// Brute-force ground truth for desk-scale problems: enumerate every
// interpretation, test it, and sum exact weights.
class Oracle {
 public:
  explicit Oracle(const Problem& problem, size_t max_atoms = 30)
      : problem_(problem), elements_(make_elements(problem.domain)), atoms_(problem.vocabulary, elements_) {
    if (atoms_.size() > max_atoms)
      throw OracleBoundError("ground atom count " + std::to_string(atoms_.size()) +
                             " exceeds the oracle bound " + std::to_string(max_atoms));
    circuit_ = std::make_unique<bruteforce::Circuit>(atoms_);
    circuit_->domain_index_ = [this](const std::string& label) { return problem_.domain.index_of(label); };
    FormulaPtr full = Formula::conj(problem.sentence, problem.constraints);
    root_ = circuit_->compile(full, elements_, {});
    collect_models();
  }

  size_t num_atoms() const { return atoms_.size(); }
  size_t model_count() const { return model_assignments_.size(); }
  const std::vector<uint64_t>& model_assignments() const { return model_assignments_; }

  Structure structure_of(uint64_t assignment) const {
    Structure s(problem_.domain);
    for (size_t i = 0; i < atoms_.size(); ++i)
      if ((assignment >> i) & 1) s.insert(atoms_.atom(i));
    return s;
  }

  uint64_t assignment_of(const Structure& s) const {
    uint64_t out = 0;
    for (const auto& a : s.atoms()) {
      int idx = atoms_.index_of(a);
      if (idx < 0) throw std::invalid_argument("structure atom outside the problem vocabulary");
      out |= uint64_t(1) << idx;
    }
    return out;
  }

  Rational weight_of(uint64_t assignment) const {
    Rational w(1);
    for (const auto& p : problem_.vocabulary) {
      uint64_t mask = atoms_.pred_mask(p.name);
      auto [b, e] = atoms_.pred_range(p.name);
      uint64_t total = e - b;
      uint64_t pos = static_cast<uint64_t>(std::popcount(assignment & mask));
      w *= rat_pow(problem_.weights.positive(p.name), pos);
      w *= rat_pow(problem_.weights.negative(p.name), total - pos);
    }
    return w;
  }

  // All models in canonical enumeration order.
  std::vector<Structure> enumerate_models() const {
    std::vector<Structure> out;
    out.reserve(model_assignments_.size());
    for (uint64_t a : model_assignments_) out.push_back(structure_of(a));
    return out;
  }

  const Rational& brute_count() const { return total_; }

  // Lexicographic index of a model among all models; -1 if not a model.
  int64_t model_index(const Structure& s) const {
    uint64_t a = assignment_of(s);
    auto it = std::lower_bound(model_assignments_.begin(), model_assignments_.end(), a);
    if (it == model_assignments_.end() || *it != a) return -1;
    return it - model_assignments_.begin();
  }

  Rational model_probability(const Structure& s) const {
    if (total_ == 0) throw std::invalid_argument("problem has no model of positive weight");
    int64_t idx = model_index(s);
    if (idx < 0) return Rational(0);
    return weight_of(model_assignments_[static_cast<size_t>(idx)]) / total_;
  }

  // Map from canonical structure text to exact probability.
  std::map<std::string, Rational> exact_distribution() const {
    if (total_ == 0) throw std::invalid_argument("problem has no model of positive weight");
    std::map<std::string, Rational> out;
    for (uint64_t a : model_assignments_) out[structure_of(a).canonical_text()] = weight_of(a) / total_;
    return out;
  }

 private:
  static std::vector<uint32_t> make_elements(const Domain& d) {
    std::vector<uint32_t> out(d.size());
    for (uint32_t i = 0; i < d.size(); ++i) out[i] = i;
    return out;
  }

  void collect_models() {
    std::vector<int> slots(atoms_.size());
    for (size_t i = 0; i < atoms_.size(); ++i) slots[i] = static_cast<int>(i);
    bool unit_weights = true;
    for (const auto& p : problem_.vocabulary)
      if (problem_.weights.positive(p.name) != 1 || problem_.weights.negative(p.name) != 1)
        unit_weights = false;
    total_ = 0;
    bruteforce::enumerate_satisfying(*circuit_, root_, atoms_.size(), slots, 0, [&](uint64_t a) {
      model_assignments_.push_back(a);
      if (!unit_weights) total_ += weight_of(a);
    });
    std::sort(model_assignments_.begin(), model_assignments_.end());
    if (unit_weights) total_ = Rational(static_cast<unsigned long>(model_assignments_.size()));
  }

  Problem problem_;
  std::vector<uint32_t> elements_;
  bruteforce::AtomTable atoms_;
  std::unique_ptr<bruteforce::Circuit> circuit_;
  uint32_t root_ = 0;
  std::vector<uint64_t> model_assignments_;
  Rational total_;
};

// Brute-force conditional WFOMC of Gamma_T with fixed cell types, fixed
// ground 2-tables, and residual cardinality thresholds: the ground truth for
// the W_n machinery and the recursion identities.
inline Rational brute_general_wfomc(const GeneralProblem& gp, const std::vector<bool>& sigma,
                                    const std::vector<uint32_t>& elements,
                                    const std::vector<CellType>& cells, const TypeSpace& space,
                                    const std::map<GroundAtom, bool>& fixed_atoms,
                                    const std::vector<int64_t>& thresholds,
                                    size_t max_atoms = 30) {
  bruteforce::AtomTable atoms(gp.vocabulary, elements);
  if (atoms.size() > max_atoms) throw OracleBoundError("conditioned oracle bound exceeded");

  std::map<GroundAtom, bool> fixed = fixed_atoms;
  // nullary assignment
  const auto& nullary = space.nullary_predicates();
  for (size_t i = 0; i < nullary.size(); ++i) fixed[{nullary[i], {}}] = sigma[i];
  // cell 1-types fix all unary and reflexive atoms
  const auto& lits = space.one_literals();
  for (size_t e = 0; e < elements.size(); ++e) {
    for (size_t i = 0; i < lits.size(); ++i) {
      bool truth = space.one_truth(cells[e].one_type, i);
      if (lits[i].reflexive)
        fixed[{lits[i].pred, {elements[e], elements[e]}}] = truth;
      else
        fixed[{lits[i].pred, {elements[e]}}] = truth;
    }
  }

  bruteforce::Circuit circuit(atoms);
  std::vector<uint32_t> parts;
  uint32_t matrix_root =
      circuit.compile(Formula::forall("x", Formula::forall("y", gp.matrix)), elements, fixed);
  parts.push_back(matrix_root);
  // existential obligations from the blocks
  for (size_t e = 0; e < elements.size(); ++e) {
    for (size_t k = 0; k < gp.exist_preds.size(); ++k) {
      if (!(cells[e].block & (BlockMask(1) << k))) continue;
      std::vector<uint32_t> witnesses;
      for (uint32_t b : elements) {
        GroundAtom atom{gp.exist_preds[k], {elements[e], b}};
        auto fx = fixed.find(atom);
        if (fx != fixed.end())
          witnesses.push_back(circuit.constant(fx->second));
        else
          witnesses.push_back(circuit.atom(static_cast<uint32_t>(atoms.index_of(atom))));
      }
      parts.push_back(circuit.gate(bruteforce::Circuit::Op::Or, std::move(witnesses)));
    }
  }
  // residual constraints
  if (!(gp.constraints->kind == Formula::Kind::BoolConst && gp.constraints->value)) {
    uint32_t c = circuit.compile(gp.constraints, elements, fixed, &thresholds);
    parts.push_back(c);
  }
  uint32_t root = circuit.gate(bruteforce::Circuit::Op::And, std::move(parts));

  // enumerate free atoms; weight includes fixed and free literals alike
  std::vector<int> slots(atoms.size(), -1);
  uint64_t fixed_bits = 0;
  int next_slot = 0;
  for (size_t i = 0; i < atoms.size(); ++i) {
    auto it = fixed.find(atoms.atom(i));
    if (it != fixed.end()) {
      if (it->second) fixed_bits |= uint64_t(1) << i;
    } else {
      slots[i] = next_slot++;
    }
  }
  Rational total(0);
  bruteforce::enumerate_satisfying(circuit, root, atoms.size(), slots, fixed_bits, [&](uint64_t a) {
    Rational w(1);
    for (const auto& p : gp.vocabulary) {
      auto [b, e] = atoms.pred_range(p.name);
      uint64_t mask = atoms.pred_mask(p.name);
      uint64_t pos = static_cast<uint64_t>(std::popcount(a & mask));
      w *= rat_pow(gp.weights.positive(p.name), pos);
      w *= rat_pow(gp.weights.negative(p.name), (e - b) - pos);
    }
    total += w;
  });
  return total;
}

// Verifies the recursion identity: for a valid substructure, the conditioned
// WFOMC with A_t fixed equals the substructure weight times tau_t's weight
// times the WFOMC of the relaxed problem over the shrunken domain. For an
// invalid substructure only the left side is guaranteed to vanish.
inline bool check_reduction_identity(const GeneralProblem& gp, const std::vector<bool>& sigma,
                                     const TypeSpace& space, const std::vector<uint32_t>& elements,
                                     const std::vector<CellType>& cells, size_t t_pos,
                                     const std::vector<TwoTableId>& partner_tables,
                                     const std::vector<int64_t>& thresholds, CountContext& ctx) {
  uint32_t et = elements[t_pos];
  OneTypeId tau_t = cells[t_pos].one_type;
  // A_t: full tables toward every partner
  std::map<GroundAtom, bool> fixed;
  Rational at_weight(1);
  const auto& two_lits = space.two_literals();
  size_t pi = 0;
  std::vector<uint32_t> rest_elements;
  std::vector<CellType> rest_cells;
  bool valid = ctx.is_valid_one_type(tau_t);
  BlockMask witnessed = 0;
  for (size_t i = 0; i < elements.size(); ++i) {
    if (i == t_pos) continue;
    TwoTableId table = partner_tables[pi++];
    if (!coherent(gp.matrix, space, tau_t, cells[i].one_type, table, ctx.nullary_fn())) valid = false;
    for (size_t k = 0; k < gp.exist_preds.size(); ++k)
      if (space.table_holds(table, gp.exist_preds[k], /*forward=*/true)) witnessed |= BlockMask(1) << k;
    for (size_t l = 0; l < two_lits.size(); ++l) {
      bool truth = space.two_truth(table, l);
      if (two_lits[l].forward)
        fixed[{two_lits[l].pred, {et, elements[i]}}] = truth;
      else
        fixed[{two_lits[l].pred, {elements[i], et}}] = truth;
      at_weight *= truth ? gp.weights.positive(two_lits[l].pred) : gp.weights.negative(two_lits[l].pred);
    }
    rest_elements.push_back(elements[i]);
    rest_cells.push_back(relax(space, cells[i], table, gp.exist_preds));
  }
  // a self-witness R_k(t,t) also discharges the obligation
  for (size_t k = 0; k < gp.exist_preds.size(); ++k)
    if (space.one_type_holds(tau_t, gp.exist_preds[k], /*reflexive=*/true)) witnessed |= BlockMask(1) << k;
  if ((cells[t_pos].block & ~witnessed) != 0) valid = false;

  Rational lhs = brute_general_wfomc(gp, sigma, elements, cells, space, fixed, thresholds);

  // reduced thresholds: subtract e_t's own literals and the substructure
  std::vector<uint32_t> committed = ctx.one_type_exponents(tau_t);
  pi = 0;
  for (size_t i = 0; i < elements.size(); ++i) {
    if (i == t_pos) continue;
    auto exps = ctx.table_exponents(partner_tables[pi++]);
    for (size_t j = 0; j < exps.size(); ++j) committed[j] += exps[j];
  }
  std::vector<int64_t> reduced = thresholds;
  const auto& catoms = ctx.constraints().atoms();
  for (size_t i = 0; i < catoms.size(); ++i) reduced[i] -= committed[catoms[i].tracked_index];

  if (!valid) return lhs == 0;
  Rational tau_weight = ctx.numeric_one_type_weight(tau_t);
  Rational rhs = at_weight * tau_weight *
                 brute_general_wfomc(gp, sigma, rest_elements, rest_cells, space, {}, reduced);
  return lhs == rhs;
}

}  // namespace wfoms
