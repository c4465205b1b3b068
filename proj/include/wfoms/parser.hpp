#pragma once

#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "wfoms/formula.hpp"
#include "wfoms/structure.hpp"

namespace wfoms {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A full sampling/counting problem: sentence, weights, domain, and an
// optional Boolean combination of cardinality atoms.
struct Problem {
  FormulaPtr sentence;
  WeightMap weights;
  Domain domain;
  FormulaPtr constraints;  // cardinality atoms only; boolean(true) when absent
  std::vector<Predicate> vocabulary;
  // user-facing vocabulary when the problem itself came from a reduction
  // whose auxiliaries are determined (e.g. MLN equivalences); empty means
  // the full vocabulary
  std::vector<Predicate> output_vocabulary;

  const std::vector<Predicate>& output_preds() const {
    return output_vocabulary.empty() ? vocabulary : output_vocabulary;
  }
};

struct MlnRule {
  bool hard = false;
  Rational weight;  // multiplicative factor, i.e. a rational approximation of exp(w_i)
  FormulaPtr formula;
};

namespace detail {

enum class Tok : uint8_t {
  Ident, Number, LParen, RParen, LBrace, RBrace, Comma, Colon, Tilde, Amp, Pipe,
  Arrow, DArrow, Eq, Le, Ge, Lt, Gt, End
};

struct Token {
  Tok kind;
  std::string text;
  int line;
  int col;
};

class Lexer {
 public:
  Lexer(const std::string& src, int line) : src_(src), line_(line) { advance(); }

  const Token& peek() const { return current_; }

  Token next() {
    Token t = current_;
    advance();
    return t;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    std::ostringstream os;
    os << "parse error at line " << current_.line << ", col " << current_.col << ": " << msg;
    throw ParseError(os.str());
  }

 private:
  void advance() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    int col = static_cast<int>(pos_) + 1;
    if (pos_ >= src_.size()) {
      current_ = {Tok::End, "", line_, col};
      return;
    }
    char c = src_[pos_];
    auto single = [&](Tok k) {
      current_ = {k, std::string(1, c), line_, col};
      ++pos_;
    };
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        ++pos_;
      current_ = {Tok::Ident, src_.substr(start, pos_ - start), line_, col};
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '-' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
      size_t start = pos_;
      ++pos_;
      while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) ||
                                    src_[pos_] == '.' || src_[pos_] == '/'))
        ++pos_;
      current_ = {Tok::Number, src_.substr(start, pos_ - start), line_, col};
      return;
    }
    switch (c) {
      case '(': single(Tok::LParen); return;
      case ')': single(Tok::RParen); return;
      case '{': single(Tok::LBrace); return;
      case '}': single(Tok::RBrace); return;
      case ',': single(Tok::Comma); return;
      case ':': single(Tok::Colon); return;
      case '~': single(Tok::Tilde); return;
      case '&': single(Tok::Amp); return;
      case '|': single(Tok::Pipe); return;
      case '=': single(Tok::Eq); return;
      case '-':
        if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '>') {
          current_ = {Tok::Arrow, "->", line_, col};
          pos_ += 2;
          return;
        }
        break;
      case '<':
        if (pos_ + 2 < src_.size() && src_[pos_ + 1] == '-' && src_[pos_ + 2] == '>') {
          current_ = {Tok::DArrow, "<->", line_, col};
          pos_ += 3;
          return;
        }
        if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '=') {
          current_ = {Tok::Le, "<=", line_, col};
          pos_ += 2;
          return;
        }
        single(Tok::Lt);
        return;
      case '>':
        if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '=') {
          current_ = {Tok::Ge, ">=", line_, col};
          pos_ += 2;
          return;
        }
        single(Tok::Gt);
        return;
    }
    std::ostringstream os;
    os << "parse error at line " << line_ << ", col " << col << ": unexpected character '" << c << "'";
    throw ParseError(os.str());
  }

  const std::string& src_;
  size_t pos_ = 0;
  int line_;
  Token current_{Tok::End, "", 0, 0};
};

class FormulaParser {
 public:
  explicit FormulaParser(Lexer& lex) : lex_(lex) {}

  FormulaPtr parse() {
    auto f = parse_iff();
    return f;
  }

 private:
  FormulaPtr parse_iff() {
    auto lhs = parse_implies();
    if (lex_.peek().kind == Tok::DArrow) {
      lex_.next();
      return Formula::iff(lhs, parse_iff());
    }
    return lhs;
  }

  FormulaPtr parse_implies() {
    auto lhs = parse_or();
    if (lex_.peek().kind == Tok::Arrow) {
      lex_.next();
      return Formula::implies(lhs, parse_implies());
    }
    return lhs;
  }

  FormulaPtr parse_or() {
    auto lhs = parse_and();
    while (lex_.peek().kind == Tok::Pipe) {
      lex_.next();
      lhs = Formula::disj(lhs, parse_and());
    }
    return lhs;
  }

  FormulaPtr parse_and() {
    auto lhs = parse_unary();
    while (lex_.peek().kind == Tok::Amp) {
      lex_.next();
      lhs = Formula::conj(lhs, parse_unary());
    }
    return lhs;
  }

  FormulaPtr parse_unary() {
    const Token& t = lex_.peek();
    switch (t.kind) {
      case Tok::Tilde:
        lex_.next();
        return Formula::negate(parse_unary());
      case Tok::LParen: {
        lex_.next();
        auto inner = parse();
        expect(Tok::RParen, ")");
        return inner;
      }
      case Tok::Pipe:
        return parse_cardinality();
      case Tok::Ident: {
        if (t.text == "forall" || t.text == "exists" || t.text == "exists_")
          return parse_quantified();
        if (t.text == "true") {
          lex_.next();
          return Formula::boolean(true);
        }
        if (t.text == "false") {
          lex_.next();
          return Formula::boolean(false);
        }
        return parse_atom();
      }
      default:
        lex_.fail("expected a formula");
    }
  }

  // One or more quantifiers followed by a single colon-scoped body.
  FormulaPtr parse_quantified() {
    struct Binder {
      QuantKind kind;
      uint32_t k;
      std::string var;
    };
    std::vector<Binder> binders;
    while (lex_.peek().kind == Tok::Ident &&
           (lex_.peek().text == "forall" || lex_.peek().text == "exists" ||
            lex_.peek().text == "exists_")) {
      Token q = lex_.next();
      Binder b{QuantKind::Forall, 0, ""};
      if (q.text == "exists") b.kind = QuantKind::Exists;
      if (q.text == "exists_") {
        b.kind = QuantKind::ExistsExactly;
        expect(Tok::LBrace, "{");
        expect(Tok::Eq, "=");
        Token num = lex_.next();
        if (num.kind != Tok::Number) lex_.fail("expected a count after exists_{=");
        long k = std::stol(num.text);
        if (k < 0 || num.text.find('.') != std::string::npos || num.text.find('/') != std::string::npos)
          lex_.fail("counting quantifier needs a natural number");
        b.k = static_cast<uint32_t>(k);
        expect(Tok::RBrace, "}");
      }
      Token v = lex_.next();
      if (v.kind != Tok::Ident) lex_.fail("expected a variable after quantifier");
      if (v.text != "x" && v.text != "y") lex_.fail("variable must be x or y, got " + v.text);
      b.var = v.text;
      binders.push_back(std::move(b));
    }
    expect(Tok::Colon, ":");
    FormulaPtr body = parse();
    for (auto it = binders.rbegin(); it != binders.rend(); ++it)
      body = Formula::quantified(it->kind, it->var, body, it->k);
    return body;
  }

  FormulaPtr parse_cardinality() {
    expect(Tok::Pipe, "|");
    Token name = lex_.next();
    if (name.kind != Tok::Ident) lex_.fail("expected a predicate inside |...|");
    expect(Tok::Pipe, "|");
    Comparator cmp;
    switch (lex_.peek().kind) {
      case Tok::Eq: cmp = Comparator::Eq; break;
      case Tok::Le: cmp = Comparator::Le; break;
      case Tok::Ge: cmp = Comparator::Ge; break;
      case Tok::Lt: cmp = Comparator::Lt; break;
      case Tok::Gt: cmp = Comparator::Gt; break;
      default: lex_.fail("expected a comparator after |" + name.text + "|");
    }
    lex_.next();
    Token num = lex_.next();
    if (num.kind != Tok::Number) lex_.fail("expected a threshold");
    long q = std::stol(num.text);
    if (q < 0 || num.text.find('.') != std::string::npos || num.text.find('/') != std::string::npos)
      lex_.fail("cardinality threshold must be a natural number");
    return Formula::cardinality(name.text, cmp, q);
  }

  FormulaPtr parse_atom() {
    Token name = lex_.next();
    if (name.text.rfind("__", 0) == 0)
      lex_.fail("predicate names starting with __ are reserved: " + name.text);
    std::vector<Term> args;
    expect(Tok::LParen, "( after predicate " + name.text);
    if (lex_.peek().kind != Tok::RParen) {
      while (true) {
        Token a = lex_.next();
        if (a.kind == Tok::Ident) {
          if (a.text == "x" || a.text == "y")
            args.push_back(Term::var(a.text));
          else
            args.push_back(Term::constant(a.text));
        } else if (a.kind == Tok::Number) {
          args.push_back(Term::constant(a.text));
        } else {
          lex_.fail("expected a term");
        }
        if (lex_.peek().kind == Tok::Comma) {
          lex_.next();
          continue;
        }
        break;
      }
    }
    expect(Tok::RParen, ")");
    if (args.size() > 2) lex_.fail("predicate arity above 2: " + name.text);
    return Formula::atom(name.text, std::move(args));
  }

  void expect(Tok kind, const std::string& what) {
    if (lex_.peek().kind != kind) lex_.fail("expected " + what);
    lex_.next();
  }

  Lexer& lex_;
};

inline FormulaPtr parse_formula_line(const std::string& text, int line) {
  Lexer lex(text, line);
  FormulaParser p(lex);
  auto f = p.parse();
  if (lex.peek().kind != Tok::End) lex.fail("trailing input after formula");
  return f;
}

inline std::string strip_comment(const std::string& line) {
  auto pos = line.find('#');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

// Parses one formula in the problem-file syntax.
inline FormulaPtr parse_formula(const std::string& text) {
  return detail::parse_formula_line(text, 1);
}

// Collects the vocabulary of a sentence; cardinality-only predicates are
// reconciled against atom uses by the caller.
inline std::vector<Predicate> sentence_vocabulary(const FormulaPtr& sentence) {
  std::map<std::string, uint32_t> preds;
  std::map<std::string, uint32_t> atoms_only;
  std::function<void(const FormulaPtr&)> walk = [&](const FormulaPtr& f) {
    if (f->kind == Formula::Kind::Atom) {
      auto arity = static_cast<uint32_t>(f->args.size());
      auto [it, inserted] = atoms_only.emplace(f->predicate, arity);
      if (!inserted && it->second != arity)
        throw ParseError("predicate " + f->predicate + " used with inconsistent arity");
    }
    for (const auto& c : f->children) walk(c);
  };
  walk(sentence);
  std::vector<Predicate> out;
  for (const auto& [name, arity] : atoms_only) out.push_back({name, arity});
  return out;
}

// Parses the full problem grammar: domain/sentence/weight/constraint lines
// with # comments. Unmentioned predicates default to weights (1,1).
inline Problem parse_problem(const std::string& source) {
  Problem out;
  out.constraints = Formula::boolean(true);
  std::vector<FormulaPtr> constraint_parts;
  bool saw_domain = false, saw_sentence = false;

  std::istringstream in(source);
  std::string raw;
  int lineno = 0;
  struct WeightLine {
    std::string pred;
    Rational w, wbar;
  };
  std::vector<WeightLine> weight_lines;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = detail::trim(detail::strip_comment(raw));
    if (line.empty()) continue;
    auto colon = line.find(':');
    if (colon == std::string::npos)
      throw ParseError("parse error at line " + std::to_string(lineno) + ": expected '<directive>:'");
    std::string head = detail::trim(line.substr(0, colon));
    std::string rest = detail::trim(line.substr(colon + 1));
    if (head == "domain") {
      saw_domain = true;
      if (!rest.empty() && rest.front() == '{') {
        if (rest.back() != '}')
          throw ParseError("parse error at line " + std::to_string(lineno) + ": unterminated domain set");
        std::vector<std::string> labels;
        std::string body = rest.substr(1, rest.size() - 2);
        std::istringstream es(body);
        std::string item;
        while (std::getline(es, item, ',')) {
          item = detail::trim(item);
          if (!item.empty()) labels.push_back(item);
        }
        out.domain = Domain(std::move(labels));
      } else {
        long n = 0;
        try {
          n = std::stol(rest);
        } catch (...) {
          throw ParseError("parse error at line " + std::to_string(lineno) + ": bad domain size");
        }
        if (n < 0) throw ParseError("parse error at line " + std::to_string(lineno) + ": bad domain size");
        out.domain = Domain::of_size(static_cast<uint32_t>(n));
      }
    } else if (head == "sentence") {
      saw_sentence = true;
      out.sentence = detail::parse_formula_line(rest, lineno);
    } else if (head == "weight") {
      std::istringstream ws(rest);
      std::string pred, w1, w2;
      ws >> pred >> w1 >> w2;
      if (pred.empty() || w1.empty() || w2.empty())
        throw ParseError("parse error at line " + std::to_string(lineno) +
                         ": weight needs '<Pred> <w> <wbar>'");
      for (const auto& token : {w1, w2})
        if (token.rfind("exp(", 0) == 0)
          throw ParseError("parse error at line " + std::to_string(lineno) +
                           ": exp(...) weights are not supported; supply a rational approximation");
      try {
        weight_lines.push_back({pred, parse_rational(w1), parse_rational(w2)});
      } catch (const std::invalid_argument& e) {
        throw ParseError("parse error at line " + std::to_string(lineno) + ": " + e.what());
      }
    } else if (head == "constraint") {
      auto f = detail::parse_formula_line(rest, lineno);
      constraint_parts.push_back(f);
    } else {
      throw ParseError("parse error at line " + std::to_string(lineno) + ": unknown directive '" +
                       head + "'");
    }
  }
  if (!saw_sentence) throw ParseError("problem needs a sentence");
  if (!saw_domain) throw ParseError("problem needs a domain");
  if (out.domain.size() == 0) throw ParseError("domain must be nonempty");

  out.vocabulary = sentence_vocabulary(out.sentence);
  std::set<std::string> known;
  for (const auto& p : out.vocabulary) known.insert(p.name);

  // constraints may only mention sentence predicates, and must be pure
  // boolean combinations of cardinality atoms
  if (!constraint_parts.empty()) out.constraints = conjoin_all(constraint_parts);
  std::function<void(const FormulaPtr&)> check_constraint = [&](const FormulaPtr& f) {
    if (f->kind == Formula::Kind::CardinalityAtom) {
      if (!known.count(f->predicate))
        throw ParseError("constraint mentions unknown predicate " + f->predicate);
      return;
    }
    if (f->kind == Formula::Kind::Atom || f->kind == Formula::Kind::Quantified)
      throw ParseError("constraints must be boolean combinations of cardinality atoms");
    for (const auto& c : f->children) check_constraint(c);
  };
  check_constraint(out.constraints);

  for (const auto& wl : weight_lines) {
    if (!known.count(wl.pred)) throw ParseError("weight for unknown predicate " + wl.pred);
    out.weights.set(wl.pred, wl.w, wl.wbar);
  }
  for (const auto& p : out.vocabulary) out.weights.ensure_default(p.name);

  // constants in ground atoms must name domain elements
  std::function<void(const FormulaPtr&)> check_terms = [&](const FormulaPtr& f) {
    if (f->kind == Formula::Kind::Atom)
      for (const auto& t : f->args)
        if (!t.is_variable() && !out.domain.contains(t.text))
          throw ParseError("constant " + t.text + " is not a domain element");
    for (const auto& c : f->children) check_terms(c);
  };
  check_terms(out.sentence);
  return out;
}

// MLN source: one rule per line, `<rational-weight-or-inf> <formula>`.
inline std::vector<MlnRule> parse_mln(const std::string& source) {
  std::vector<MlnRule> rules;
  std::istringstream in(source);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = detail::trim(detail::strip_comment(raw));
    if (line.empty()) continue;
    auto sp = line.find_first_of(" \t");
    if (sp == std::string::npos)
      throw ParseError("parse error at line " + std::to_string(lineno) + ": expected '<weight> <formula>'");
    std::string wtext = line.substr(0, sp);
    std::string ftext = detail::trim(line.substr(sp + 1));
    MlnRule rule;
    if (wtext == "inf") {
      rule.hard = true;
    } else if (wtext.rfind("exp(", 0) == 0) {
      throw ParseError("parse error at line " + std::to_string(lineno) +
                       ": exp(...) weights are not supported; supply a rational approximation");
    } else {
      try {
        rule.weight = parse_rational(wtext);
      } catch (const std::invalid_argument& e) {
        throw ParseError("parse error at line " + std::to_string(lineno) + ": " + e.what());
      }
      if (rule.weight < 0)
        throw ParseError("parse error at line " + std::to_string(lineno) +
                         ": rule factors must be nonnegative");
    }
    rule.formula = detail::parse_formula_line(ftext, lineno);
    rules.push_back(std::move(rule));
  }
  return rules;
}

// Renders a structure as sorted positive atoms ("E(1,2) E(2,1)") or as a JSON
// object with a "model" array.
inline std::string render_model(const Structure& s, const std::string& format) {
  if (format == "text") return s.canonical_text();
  if (format == "json") {
    std::ostringstream os;
    os << "{\"model\":[";
    bool first = true;
    for (const auto& a : s.atoms()) {
      if (!first) os << ",";
      first = false;
      os << "\"" << s.render_atom(a) << "\"";
    }
    os << "]}";
    return os.str();
  }
  throw std::invalid_argument("unknown model format: " + format);
}

// Companion parse for render_model's text output.
inline Structure parse_model(const std::string& text, const Domain& domain) {
  Structure out(domain);
  std::istringstream in(text);
  std::string atom;
  while (in >> atom) {
    auto lp = atom.find('(');
    auto rp = atom.rfind(')');
    if (lp == std::string::npos || rp == std::string::npos || rp < lp)
      throw ParseError("malformed atom: " + atom);
    std::string pred = atom.substr(0, lp);
    std::string args = atom.substr(lp + 1, rp - lp - 1);
    std::vector<uint32_t> indices;
    if (!args.empty()) {
      std::istringstream as(args);
      std::string item;
      while (std::getline(as, item, ',')) indices.push_back(domain.index_of(detail::trim(item)));
    }
    out.insert(pred, std::move(indices));
  }
  return out;
}

}  // namespace wfoms
