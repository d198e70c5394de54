#include "scfg/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace scfg {

namespace {

class Enumerator {
 public:
  Enumerator(const Grammar& g, const OracleConfig& cfg, OracleResult& out)
      : g_(g), cfg_(cfg), out_(out), counts_(g.production_count(), 0) {
    const int n = g.nonterminal_count();
    // Shortest yield length per nonterminal.
    const long inf = std::numeric_limits<int>::max();
    minlen_.assign(n, inf);
    for (bool changed = true; changed;) {
      changed = false;
      for (const auto& p : g.productions()) {
        long len = 0;
        for (auto s : p.rhs) len += s.is_terminal() ? 1 : minlen_[s.id];
        if (len < minlen_[p.lhs]) {
          minlen_[p.lhs] = len;
          changed = true;
        }
      }
    }
    // Termination probabilities (least fixpoint).
    term_.assign(n, 0.0);
    for (int it = 0; it < 100000; ++it) {
      std::vector<double> next(n, 0.0);
      for (const auto& p : g.productions()) {
        double v = p.prob;
        for (auto s : p.rhs)
          if (s.is_nonterminal()) v *= term_[s.id];
        next[p.lhs] += v;
      }
      double change = 0.0;
      for (int x = 0; x < n; ++x) change = std::max(change, std::abs(next[x] - term_[x]));
      term_.swap(next);
      if (change < 1e-16) break;
    }
  }

  void run() {
    out_.prefixes[{}] = 1.0;
    stack_.push_back(Symbol::nonterminal(g_.start()));
    summin_ = minlen_[g_.start()];
    dfs(1.0);
  }

 private:
  void dfs(double prob) {
    // Move leading terminals of the remaining form into the yield.
    int moved = 0;
    while (!stack_.empty() && stack_.back().is_terminal()) {
      yield_.push_back(stack_.back().id);
      stack_.pop_back();
      --summin_;
      ++moved;
      if (static_cast<int>(yield_.size()) <= cfg_.max_len) {
        double rest = 1.0;
        for (auto s : stack_)
          if (s.is_nonterminal()) rest *= term_[s.id];
        out_.prefixes[yield_] += prob * rest;
      }
    }
    visit(prob);
    for (; moved > 0; --moved) {
      stack_.push_back(Symbol::terminal(yield_.back()));
      yield_.pop_back();
      ++summin_;
    }
  }

  void visit(double prob) {
    const long w = static_cast<long>(yield_.size());
    if (stack_.empty()) {
      if (w <= cfg_.max_len) record(prob);
      return;
    }
    const bool sentence_possible = w + summin_ <= cfg_.max_len;
    if (!sentence_possible) {
      if (w >= cfg_.max_len) return;
      if (prob < cfg_.prefix_tol) {
        out_.prefix_residual += prob;
        out_.prefix_cut[yield_] += prob;
        return;
      }
    } else if (prob < cfg_.mass_tol * 1e-3) {
      out_.residual += prob;
      out_.prefix_residual += prob;
      out_.string_cut[yield_] += prob;
      out_.prefix_cut[yield_] += prob;
      return;
    }

    const Symbol x = stack_.back();
    stack_.pop_back();
    summin_ -= minlen_[x.id];
    for (int id : g_.productions_of(x.id)) {
      const auto& p = g_.production(id);
      if (p.prob == 0.0) continue;
      if (++out_.expansions > cfg_.max_expansions)
        throw OracleError("oracle expansion cap exceeded");
      for (auto it = p.rhs.rbegin(); it != p.rhs.rend(); ++it) {
        stack_.push_back(*it);
        summin_ += it->is_terminal() ? 1 : minlen_[it->id];
      }
      ++counts_[id];
      rules_.push_back(id);
      dfs(prob * p.prob);
      rules_.pop_back();
      --counts_[id];
      for (auto s : p.rhs) {
        stack_.pop_back();
        summin_ -= s.is_terminal() ? 1 : minlen_[s.id];
      }
    }
    stack_.push_back(x);
    summin_ += minlen_[x.id];
  }

  void record(double prob) {
    auto& y = out_.yields[yield_];
    if (y.counts.empty()) y.counts.assign(g_.production_count(), 0.0);
    y.prob += prob;
    ++y.derivations;
    for (int id = 0; id < g_.production_count(); ++id)
      if (counts_[id]) y.counts[id] += prob * counts_[id];
    if (prob > y.viterbi_prob) {
      y.viterbi_prob = prob;
      y.viterbi_rules = rules_;
    }
    if (cfg_.keep_derivations) y.all.push_back({rules_, prob});
  }

  const Grammar& g_;
  const OracleConfig& cfg_;
  OracleResult& out_;
  std::vector<long> minlen_;
  std::vector<double> term_;
  std::vector<Symbol> stack_;  // remaining sentential form, leftmost symbol last
  std::vector<int> yield_;
  std::vector<int> counts_;
  std::vector<int> rules_;
  long summin_ = 0;
};

const OracleYield* find_yield(const Grammar& g, const OracleResult& r,
                              std::span<const std::string> x) {
  auto ids = OracleResult::ids(g, x);
  if (!ids) return nullptr;
  auto it = r.yields.find(*ids);
  return it == r.yields.end() ? nullptr : &it->second;
}

ParseTree build_tree(const Grammar& g, std::span<const int> rules, size_t& pos) {
  if (pos >= rules.size()) throw OracleError("truncated derivation");
  const auto& p = g.production(rules[pos++]);
  ParseTree t{g.nonterminal_name(p.lhs), false, {}};
  for (auto s : p.rhs) {
    if (s.is_terminal())
      t.children.push_back({g.terminal_name(s.id), true, {}});
    else
      t.children.push_back(build_tree(g, rules, pos));
  }
  return t;
}

int collect_spans(const ParseTree& t, int from, std::vector<std::pair<int, int>>& out) {
  if (t.terminal) return from + 1;
  int at = from;
  for (const auto& c : t.children) at = collect_spans(c, at, out);
  out.push_back({from, at});
  return at;
}

}  // namespace

std::optional<std::vector<int>> OracleResult::ids(const Grammar& g,
                                                  std::span<const std::string> x) {
  std::vector<int> out;
  for (const auto& tok : x) {
    auto id = g.find_terminal(tok);
    if (!id) return std::nullopt;
    out.push_back(*id);
  }
  return out;
}

OracleResult enumerate(const Grammar& g, const OracleConfig& cfg) {
  OracleResult out;
  Enumerator e(g, cfg, out);
  e.run();
  return out;
}

double oracle_string_prob(const Grammar& g, const OracleResult& r, std::span<const std::string> x) {
  const auto* y = find_yield(g, r, x);
  return y ? y->prob : 0.0;
}

double oracle_prefix_prob(const Grammar& g, const OracleResult& r, std::span<const std::string> x) {
  auto ids = OracleResult::ids(g, x);
  if (!ids) return 0.0;
  auto it = r.prefixes.find(*ids);
  return it == r.prefixes.end() ? 0.0 : it->second;
}

namespace {

// Sum of cut mass recorded at prefixes of x of length < limit.
double cut_mass(const std::map<std::vector<int>, double>& cut, const std::vector<int>& x,
                size_t limit) {
  double sum = 0.0;
  std::vector<int> pre;
  for (size_t k = 0; k < limit; ++k) {
    if (auto it = cut.find(pre); it != cut.end()) sum += it->second;
    if (k < x.size()) pre.push_back(x[k]);
  }
  return sum;
}

}  // namespace

double oracle_string_residual(const Grammar& g, const OracleResult& r,
                              std::span<const std::string> x) {
  auto ids = OracleResult::ids(g, x);
  if (!ids) return 0.0;
  return cut_mass(r.string_cut, *ids, ids->size() + 1);
}

double oracle_prefix_residual(const Grammar& g, const OracleResult& r,
                              std::span<const std::string> x) {
  auto ids = OracleResult::ids(g, x);
  if (!ids) return 0.0;
  return cut_mass(r.prefix_cut, *ids, ids->size());
}

std::vector<double> oracle_expected_counts(const Grammar& g, const OracleResult& r,
                                           std::span<const std::string> x) {
  const auto* y = find_yield(g, r, x);
  if (!y || y->prob == 0.0) throw OracleError("string has no derivation");
  std::vector<double> out(y->counts);
  for (double& c : out) c /= y->prob;
  return out;
}

std::optional<std::pair<ParseTree, double>> oracle_viterbi(const Grammar& g,
                                                           const OracleResult& r,
                                                           std::span<const std::string> x) {
  const auto* y = find_yield(g, r, x);
  if (!y || y->viterbi_rules.empty()) return std::nullopt;
  return std::make_pair(derivation_tree(g, y->viterbi_rules), y->viterbi_prob);
}

ParseTree derivation_tree(const Grammar& g, std::span<const int> leftmost_rules) {
  size_t pos = 0;
  auto t = build_tree(g, leftmost_rules, pos);
  if (pos != leftmost_rules.size()) throw OracleError("derivation has leftover rules");
  return t;
}

std::vector<std::pair<int, int>> constituent_spans(const ParseTree& t) {
  std::vector<std::pair<int, int>> out;
  collect_spans(t, 0, out);
  return out;
}

}  // namespace scfg
