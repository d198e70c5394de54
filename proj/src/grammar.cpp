#include "scfg/grammar.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace scfg {

namespace {

bool is_reserved(std::string_view tok) {
  return tok == "(" || tok == ")" || tok == "?" || tok == "->" || tok == "[" || tok == "]" ||
         tok == "eps";
}

bool has_reserved_char(std::string_view tok) {
  return tok.find_first_of("()[]?") != std::string_view::npos;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::optional<int> Grammar::find_nonterminal(std::string_view name) const {
  auto it = nonterminal_ids_.find(std::string(name));
  if (it == nonterminal_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> Grammar::find_terminal(std::string_view name) const {
  auto it = terminal_ids_.find(std::string(name));
  if (it == terminal_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> Grammar::find_production(int lhs, std::span<const Symbol> rhs) const {
  for (int id : by_lhs_.at(lhs)) {
    const auto& p = productions_[id];
    if (std::equal(p.rhs.begin(), p.rhs.end(), rhs.begin(), rhs.end())) return id;
  }
  return std::nullopt;
}

bool Grammar::has_null_productions() const {
  return std::any_of(productions_.begin(), productions_.end(),
                     [](const Production& p) { return p.is_null(); });
}

Grammar Grammar::with_probabilities(std::span<const double> probs) const {
  if (probs.size() != productions_.size())
    throw std::invalid_argument("with_probabilities: size mismatch");
  Grammar g = *this;
  for (size_t i = 0; i < probs.size(); ++i) g.productions_[i].prob = probs[i];
  return g;
}

GrammarBuilder GrammarBuilder::from(const Grammar& g) {
  GrammarBuilder b(Options{true, true});
  for (const auto& p : g.productions()) {
    std::vector<std::string> rhs;
    for (auto s : p.rhs) rhs.push_back(g.symbol_name(s));
    b.add(g.nonterminal_name(p.lhs), std::move(rhs), p.prob);
  }
  for (int t = 0; t < g.terminal_count(); ++t) b.declare_terminal(g.terminal_name(t));
  b.set_start(g.nonterminal_name(g.start()));
  return b;
}

GrammarBuilder& GrammarBuilder::add(std::string lhs, std::vector<std::string> rhs, double prob,
                                    int line) {
  rules_.push_back({std::move(lhs), std::move(rhs), prob, line});
  return *this;
}

GrammarBuilder& GrammarBuilder::set_start(std::string name) {
  start_ = std::move(name);
  return *this;
}

GrammarBuilder& GrammarBuilder::declare_terminal(std::string name) {
  extra_terminals_.push_back(std::move(name));
  return *this;
}

Grammar GrammarBuilder::build(std::vector<std::string>* warnings) const {
  auto warn = [&](std::string msg) {
    if (warnings) warnings->push_back(std::move(msg));
  };
  Grammar g;
  for (const auto& r : rules_) {
    if (g.nonterminal_ids_.emplace(r.lhs, static_cast<int>(g.nonterminals_.size())).second)
      g.nonterminals_.push_back(r.lhs);
  }
  auto intern_terminal = [&](const std::string& name) {
    if (g.nonterminal_ids_.count(name)) return;
    if (g.terminal_ids_.emplace(name, static_cast<int>(g.terminals_.size())).second)
      g.terminals_.push_back(name);
  };
  for (const auto& r : rules_)
    for (const auto& s : r.rhs) intern_terminal(s);
  for (const auto& t : extra_terminals_) intern_terminal(t);

  if (g.nonterminals_.empty()) throw GrammarError("grammar has no productions");

  // (lhs, rhs) -> production index, for duplicate detection.
  std::map<std::pair<int, std::vector<std::pair<int, int>>>, int> seen;
  g.by_lhs_.assign(g.nonterminals_.size(), {});
  for (const auto& r : rules_) {
    if (!(r.prob >= 0.0) || !std::isfinite(r.prob))
      throw GrammarError("invalid probability for rule of " + r.lhs, r.line);
    if (r.prob > 1.0 && !options_.allow_unnormalized)
      throw GrammarError("probability outside (0,1] for rule of " + r.lhs, r.line);
    if (r.prob == 0.0) {
      warn("dropping zero-probability rule of " + r.lhs);
      continue;
    }
    Production p;
    p.lhs = g.nonterminal_ids_.at(r.lhs);
    p.prob = r.prob;
    std::vector<std::pair<int, int>> sig;
    for (const auto& s : r.rhs) {
      auto nt = g.nonterminal_ids_.find(s);
      Symbol sym = nt != g.nonterminal_ids_.end() ? Symbol::nonterminal(nt->second)
                                                  : Symbol::terminal(g.terminal_ids_.at(s));
      p.rhs.push_back(sym);
      sig.emplace_back(static_cast<int>(sym.kind), sym.id);
    }
    auto key = std::make_pair(p.lhs, std::move(sig));
    if (auto it = seen.find(key); it != seen.end()) {
      if (!options_.merge_duplicates)
        throw GrammarError("duplicate production " + format_production(g, p), r.line);
      warn("merging duplicate production " + format_production(g, p));
      g.productions_[it->second].prob += p.prob;
      continue;
    }
    seen.emplace(std::move(key), static_cast<int>(g.productions_.size()));
    g.by_lhs_[p.lhs].push_back(static_cast<int>(g.productions_.size()));
    g.productions_.push_back(std::move(p));
  }
  if (g.productions_.empty()) throw GrammarError("grammar has no productions");

  if (start_) {
    auto it = g.nonterminal_ids_.find(*start_);
    if (it == g.nonterminal_ids_.end())
      throw GrammarError("start symbol " + *start_ + " is not a nonterminal");
    g.start_ = it->second;
  } else {
    g.start_ = 0;
  }
  return g;
}

Grammar parse_grammar(std::string_view text, const LoadOptions& options,
                      std::vector<std::string>* warnings) {
  GrammarBuilder b(GrammarBuilder::Options{options.merge_duplicates, options.allow_unnormalized});
  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto toks = split_ws(line);
    if (toks.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (toks[0] == "%start") {
      if (toks.size() != 2) throw GrammarError("%start expects one symbol", line_no);
      b.set_start(std::string(toks[1]));
      continue;
    }
    if (toks.size() < 2 || toks[1] != "->") throw GrammarError("expected 'LHS ->'", line_no);
    if (is_reserved(toks[0]) || has_reserved_char(toks[0]))
      throw GrammarError("reserved symbol used as LHS: " + std::string(toks[0]), line_no);

    // Probability: "[p]" as the trailing text, possibly split as "[ p ]".
    auto open = line.rfind('[');
    auto close = line.rfind(']');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open)
      throw GrammarError("missing [prob]", line_no);
    if (!split_ws(line.substr(close + 1)).empty())
      throw GrammarError("text after [prob]", line_no);
    auto prob_text = split_ws(line.substr(open + 1, close - open - 1));
    if (prob_text.size() != 1) throw GrammarError("malformed [prob]", line_no);
    double prob = 0.0;
    auto pt = prob_text[0];
    auto [ptr, ec] = std::from_chars(pt.data(), pt.data() + pt.size(), prob);
    if (ec != std::errc() || ptr != pt.data() + pt.size())
      throw GrammarError("malformed probability '" + std::string(pt) + "'", line_no);
    if (prob < 0.0 || (prob > 1.0 && !options.allow_unnormalized))
      throw GrammarError("probability outside (0,1]: " + std::string(pt), line_no);

    auto arrow = line.find("->");
    auto rhs_toks = split_ws(line.substr(arrow + 2, open - arrow - 2));
    std::vector<std::string> rhs;
    if (rhs_toks.size() == 1 && rhs_toks[0] == "eps") {
      // null production
    } else {
      for (auto t : rhs_toks) {
        if (is_reserved(t) || has_reserved_char(t))
          throw GrammarError("reserved token in right-hand side: " + std::string(t), line_no);
        rhs.emplace_back(t);
      }
    }
    b.add(std::string(toks[0]), std::move(rhs), prob, line_no);
    if (end == text.size()) break;
  }
  Grammar g = b.build(warnings);

  std::vector<double> sums(g.nonterminal_count(), 0.0);
  for (const auto& p : g.productions()) sums[p.lhs] += p.prob;
  for (int x = 0; x < g.nonterminal_count(); ++x) {
    if (std::abs(sums[x] - 1.0) > kProperTolerance && !options.allow_unnormalized) {
      std::string msg = "improper: probabilities of " + g.nonterminal_name(x) + " sum to " +
                        shortest(sums[x]);
      if (options.strict) throw GrammarError(msg);
      if (warnings) warnings->push_back(msg);
    }
  }
  return g;
}

Grammar load_grammar_file(const std::string& path, const LoadOptions& options,
                          std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw GrammarError("cannot open grammar file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_grammar(ss.str(), options, warnings);
}

std::string format_production(const Grammar& g, const Production& p) {
  std::string s = g.nonterminal_name(p.lhs) + " ->";
  if (p.rhs.empty()) s += " eps";
  for (auto sym : p.rhs) s += " " + g.symbol_name(sym);
  return s;
}

std::string to_text(const Grammar& g) {
  std::string out;
  if (g.start() != g.productions().front().lhs)
    out += "%start " + g.nonterminal_name(g.start()) + "\n";
  for (const auto& p : g.productions())
    out += format_production(g, p) + " [" + shortest(p.prob) + "]\n";
  return out;
}

Grammar renormalize(const Grammar& g) {
  std::vector<double> sums(g.nonterminal_count(), 0.0);
  for (const auto& p : g.productions()) sums[p.lhs] += p.prob;
  std::vector<double> probs;
  for (const auto& p : g.productions()) {
    if (!(sums[p.lhs] > 0.0))
      throw GrammarError("cannot renormalize " + g.nonterminal_name(p.lhs) + ": zero total");
    probs.push_back(p.prob / sums[p.lhs]);
  }
  return g.with_probabilities(probs);
}

std::vector<bool> derives_nonempty(const Grammar& g) {
  // productive[X]: X derives some terminal string at all.
  int n = g.nonterminal_count();
  std::vector<bool> productive(n, false), nonempty(n, false);
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& p : g.productions()) {
      if (productive[p.lhs]) continue;
      bool ok = std::all_of(p.rhs.begin(), p.rhs.end(), [&](Symbol s) {
        return s.is_terminal() || productive[s.id];
      });
      if (ok) productive[p.lhs] = changed = true;
    }
  }
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& p : g.productions()) {
      if (nonempty[p.lhs]) continue;
      bool all_productive = std::all_of(p.rhs.begin(), p.rhs.end(), [&](Symbol s) {
        return s.is_terminal() || productive[s.id];
      });
      bool some_nonempty = std::any_of(p.rhs.begin(), p.rhs.end(), [&](Symbol s) {
        return s.is_terminal() || nonempty[s.id];
      });
      if (all_productive && some_nonempty) nonempty[p.lhs] = changed = true;
    }
  }
  return nonempty;
}

double spectral_radius_estimate(const std::vector<std::vector<double>>& m, int iterations) {
  size_t n = m.size();
  if (n == 0) return 0.0;
  std::vector<double> v(n, 1.0), w(n);
  double log_sum = 0.0;
  int counted = 0;
  for (int it = 0; it < iterations; ++it) {
    double norm = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (size_t j = 0; j < n; ++j) s += m[i][j] * v[j];
      w[i] = s;
      norm = std::max(norm, std::abs(s));
    }
    if (norm == 0.0) return 0.0;
    for (size_t i = 0; i < n; ++i) v[i] = w[i] / norm;
    // Average the growth rate over the second half to damp periodic matrices.
    if (it >= iterations / 2) {
      log_sum += std::log(norm);
      ++counted;
    }
  }
  return std::exp(log_sum / counted);
}

}  // namespace scfg
