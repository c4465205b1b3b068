#pragma once

#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "wfoms/normalizer.hpp"
#include "wfoms/parser.hpp"

namespace wfoms {

// Named problem builders for the experiment presets; sizes (and k) are bound
// at build time.
struct Preset {
  std::string name;
  std::string summary;
  bool needs_k = false;
  bool is_mln = false;
  std::vector<std::string> count_preds;  // predicates tracked in count-distribution tests
  std::function<std::string(uint32_t n, uint32_t k)> source;
};

inline const std::vector<Preset>& preset_catalog() {
  static const std::vector<Preset> presets = [] {
    std::vector<Preset> out;

    out.push_back({"graphs-no-isolated", "undirected graphs with no isolated vertices", false, false,
                   {"E"},
                   [](uint32_t n, uint32_t) {
                     std::ostringstream os;
                     os << "domain: " << n << "\n"
                        << "sentence: (forall x forall y: (E(x,y) -> E(y,x)) & ~E(x,x)) & "
                           "(forall x exists y: E(x,y))\n";
                     return os.str();
                   }});

    out.push_back({"kregular", "k-regular simple graphs", true, false, {"E"},
                   [](uint32_t n, uint32_t k) {
                     std::ostringstream os;
                     os << "domain: " << n << "\n"
                        << "sentence: (forall x forall y: E(x,y) -> E(y,x)) & (forall x: ~E(x,x)) & "
                           "(forall x exists_{=" << k << "} y: E(x,y))\n";
                     return os.str();
                   }});

    out.push_back({"functions", "functions from the domain to itself", false, false, {"f"},
                   [](uint32_t n, uint32_t) {
                     std::ostringstream os;
                     os << "domain: " << n << "\n"
                        << "sentence: forall x exists_{=1} y: f(x,y)\n";
                     return os.str();
                   }});

    out.push_back({"functions-nofix", "functions without fixed points", false, false, {"f"},
                   [](uint32_t n, uint32_t) {
                     std::ostringstream os;
                     os << "domain: " << n << "\n"
                        << "sentence: (forall x exists_{=1} y: f(x,y)) & (forall x: ~f(x,x))\n";
                     return os.str();
                   }});

    out.push_back({"permutations", "permutations of the domain", false, false, {"Per"},
                   [](uint32_t n, uint32_t) {
                     std::ostringstream os;
                     os << "domain: " << n << "\n"
                        << "sentence: (forall x exists_{=1} y: Per(x,y)) & "
                           "(forall y exists_{=1} x: Per(x,y))\n";
                     return os.str();
                   }});

    out.push_back({"derangements", "permutations without fixed points", false, false, {"Per"},
                   [](uint32_t n, uint32_t) {
                     std::ostringstream os;
                     os << "domain: " << n << "\n"
                        << "sentence: (forall x exists_{=1} y: Per(x,y)) & "
                           "(forall y exists_{=1} x: Per(x,y)) & (forall x: ~Per(x,x))\n";
                     return os.str();
                   }});

    // rule factors are rational approximations: 122140/100000 for exp(0.2),
    // 366929/100000 for exp(1.3) (both truncated after five decimals)
    out.push_back({"friends-smokers", "friends-smokers MLN where everyone has a friend", false, true,
                   {"fr", "sm"},
                   [](uint32_t n, uint32_t) {
                     std::ostringstream os;
                     os << "# domain: " << n << "\n"
                        << "inf ~fr(x,x)\n"
                        << "inf fr(x,y) -> fr(y,x)\n"
                        << "1 sm(x)\n"
                        << "122140/100000 fr(x,y) & sm(x) -> sm(y)\n"
                        << "inf exists y: fr(x,y)\n";
                     return os.str();
                   }});

    out.push_back({"employment", "employment MLN: workers have bosses or are bosses", false, true,
                   {"workfor", "boss"},
                   [](uint32_t n, uint32_t) {
                     std::ostringstream os;
                     os << "# domain: " << n << "\n"
                        << "366929/100000 (exists y: workfor(x,y)) | boss(x)\n";
                     return os.str();
                   }});

    return out;
  }();
  return presets;
}

inline const Preset& find_preset(const std::string& name) {
  for (const auto& p : preset_catalog())
    if (p.name == name) return p;
  throw std::invalid_argument("unknown preset: " + name);
}

inline Problem build_preset(const std::string& name, uint32_t n, uint32_t k = 0) {
  const Preset& p = find_preset(name);
  if (p.needs_k && k == 0) throw std::invalid_argument("preset " + name + " needs --k");
  std::string src = p.source(n, k);
  if (!p.is_mln) return parse_problem(src);
  auto rules = parse_mln(src);
  return mln_to_wfoms(rules, Domain::of_size(n));
}

}  // namespace wfoms
