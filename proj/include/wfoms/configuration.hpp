#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "wfoms/rational.hpp"

namespace wfoms {

// The configuration space T_{M,m}: all vectors of m naturals summing to M.
// Enumerated in a fixed deterministic order (first coordinate descending),
// |T_{M,m}| = C(M+m-1, m-1).
class ConfigurationSpace {
 public:
  ConfigurationSpace(uint32_t total, uint32_t slots) : total_(total), slots_(slots) {}

  template <typename Fn>
  void for_each(Fn&& fn) const {
    std::vector<uint32_t> current(slots_, 0);
    if (slots_ == 0) {
      if (total_ == 0) fn(const_cast<const std::vector<uint32_t>&>(current));
      return;
    }
    recurse(0, total_, current, fn);
  }

  std::vector<std::vector<uint32_t>> all() const {
    std::vector<std::vector<uint32_t>> out;
    for_each([&](const std::vector<uint32_t>& v) { out.push_back(v); });
    return out;
  }

  Integer size() const {
    if (slots_ == 0) return total_ == 0 ? Integer(1) : Integer(0);
    return binomial(total_ + slots_ - 1, slots_ - 1);
  }

 private:
  template <typename Fn>
  void recurse(uint32_t slot, uint32_t remaining, std::vector<uint32_t>& current, Fn&& fn) const {
    if (slot + 1 == slots_) {
      current[slot] = remaining;
      fn(const_cast<const std::vector<uint32_t>&>(current));
      return;
    }
    for (uint32_t take = remaining + 1; take-- > 0;) {
      current[slot] = take;
      recurse(slot + 1, remaining - take, current, fn);
    }
  }

  uint32_t total_;
  uint32_t slots_;
};

// Cartesian product over several configuration spaces; visits the
// concatenated vectors.
template <typename Fn>
inline void product_configurations(const std::vector<ConfigurationSpace>& spaces, Fn&& fn) {
  std::vector<std::vector<std::vector<uint32_t>>> parts;
  parts.reserve(spaces.size());
  for (const auto& s : spaces) parts.push_back(s.all());
  std::vector<uint32_t> flat;
  std::function<void(size_t)> rec = [&](size_t idx) {
    if (idx == parts.size()) {
      fn(const_cast<const std::vector<uint32_t>&>(flat));
      return;
    }
    for (const auto& piece : parts[idx]) {
      size_t mark = flat.size();
      flat.insert(flat.end(), piece.begin(), piece.end());
      rec(idx + 1);
      flat.resize(mark);
    }
  };
  rec(0);
}

}  // namespace wfoms
