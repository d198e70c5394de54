#include <cctype>
#include <set>
#include <tuple>

#include "parser_internal.hpp"
#include "scfg/parser.hpp"

namespace scfg {

std::string ParseTree::to_string() const {
  if (terminal) return label;
  std::string out = "(" + label;
  for (const auto& c : children) out += " " + c.to_string();
  return out + ")";
}

std::vector<std::string> ParseTree::yield() const {
  if (terminal) return {label};
  std::vector<std::string> out;
  for (const auto& c : children) {
    auto y = c.yield();
    out.insert(out.end(), y.begin(), y.end());
  }
  return out;
}

std::optional<double> tree_probability(const Grammar& g, const ParseTree& t) {
  if (t.terminal) return 1.0;
  auto lhs = g.find_nonterminal(t.label);
  if (!lhs) return std::nullopt;
  std::vector<Symbol> rhs;
  for (const auto& c : t.children) {
    auto id = c.terminal ? g.find_terminal(c.label) : g.find_nonterminal(c.label);
    if (!id) return std::nullopt;
    rhs.push_back(c.terminal ? Symbol::terminal(*id) : Symbol::nonterminal(*id));
  }
  auto rule = g.find_production(*lhs, rhs);
  if (!rule) return std::nullopt;
  double p = g.production(*rule).prob;
  for (const auto& c : t.children) {
    auto sub = tree_probability(g, c);
    if (!sub) return std::nullopt;
    p *= *sub;
  }
  return p;
}

namespace {

ParseTree epsilon_tree(const Grammar& g, const BestEpsilon& best, int x) {
  ParseTree t{g.nonterminal_name(x), false, {}};
  for (auto s : g.production(best.rule[x]).rhs) t.children.push_back(epsilon_tree(g, best, s.id));
  return t;
}

class TreeBuilder {
 public:
  explicit TreeBuilder(const ParseResult& r) : r_(r), g_(*r.grammar) {}

  // Children for the symbols left of the dot of the state at ref.
  void children(StateRef ref, std::vector<ParseTree>& out) const {
    const auto& s = r_.chart.state(ref);
    const auto& link = s.link;
    switch (link.kind) {
      case ViterbiLink::Kind::Initial:
        return;
      case ViterbiLink::Kind::Copy:
        children(link.pred, out);
        return;
      case ViterbiLink::Kind::Scan: {
        children(link.pred, out);
        auto sym = g_.production(s.key.target).rhs[s.key.dot - 1];
        out.push_back({g_.terminal_name(sym.id), true, {}});
        return;
      }
      case ViterbiLink::Kind::Shift: {
        children(link.pred, out);
        out.push_back(epsilon_tree(g_, r_.tables->best_eps, dotted_nonterminal(s.key)));
        return;
      }
      case ViterbiLink::Kind::Complete:
        children(link.pred, out);
        out.push_back(node(link.child));
        return;
    }
  }

  ParseTree node(StateRef ref) const {
    const auto& s = r_.chart.state(ref);
    ParseTree t{g_.nonterminal_name(lhs_of(g_, s.key)), false, {}};
    children(ref, t.children);
    return t;
  }

 private:
  int dotted_nonterminal(const StateKey& k) const {
    if (k.kind == StateKind::Rule) return g_.production(k.target).rhs[k.dot - 1].id;
    return k.target;
  }

  const ParseResult& r_;
  const Grammar& g_;
};

}  // namespace

std::pair<ParseTree, double> viterbi_parse(const ParseResult& r) {
  if (!r.has_viterbi) throw ParseError("parse ran without Viterbi bookkeeping");
  if (!r.accepted) throw ParseError("input was not accepted");
  TreeBuilder b(r);
  std::vector<ParseTree> top;
  b.children(r.final_state, top);
  return {std::move(top.front()), r.chart.state(r.final_state).viterbi};
}

double substring_probability(const ParseResult& r, int x, int k, int i) {
  const int n = static_cast<int>(r.chart.positions.size()) - 1;
  if (x < 0 || x >= r.grammar->nonterminal_count())
    throw ParseError("unknown nonterminal id " + std::to_string(x));
  if (k < 0 || i < k || i > n) throw ParseError("substring indices out of range");
  double sum = 0.0;
  for (const auto& s : r.chart.sets[r.chart.positions[i]].states())
    if (s.key.kind == StateKind::Rule && s.key.start == k && lhs_of(*r.grammar, s.key) == x &&
        is_complete(*r.grammar, s.key))
      sum += s.gamma;
  return sum;
}

double substring_probability(const ParseResult& r, const std::string& x, int k, int i) {
  auto id = r.grammar->find_nonterminal(x);
  if (!id) throw ParseError("unknown nonterminal " + x);
  return substring_probability(r, *id, k, i);
}

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : line) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      flush();
    } else if (ch == '(' || ch == ')') {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur += ch;
    }
  }
  flush();
  return out;
}

namespace detail {

namespace {

struct Span {
  int label, from, to;
  friend bool operator<(const Span& a, const Span& b) {
    return std::tie(a.label, a.from, a.to) < std::tie(b.label, b.from, b.to);
  }
};

// Constituents that some larger constituent of the chart uses as a
// nonempty child.
std::set<Span> consumed_constituents(const Grammar& g, const EpsilonProbs& eps,
                                     const std::set<Span>& cons, const std::vector<int>& toks) {
  const int n = static_cast<int>(toks.size());
  auto matches = [&](Symbol s, int a, int b) {
    if (s.is_terminal()) return b == a + 1 && toks[a] == s.id;
    if (a == b) return eps.nullable(s.id);
    return cons.count({s.id, a, b}) > 0;
  };
  std::set<Span> consumed;
  for (const auto& w : cons) {
    for (int id : g.productions_of(w.label)) {
      const auto& rhs = g.production(id).rhs;
      const int m = static_cast<int>(rhs.size());
      // fwd[t][b]: the first t symbols derive x[w.from, b); bwd[t][a]: the
      // symbols from t on derive x[a, w.to).
      std::vector<std::vector<char>> fwd(m + 1, std::vector<char>(n + 1, 0));
      std::vector<std::vector<char>> bwd(m + 1, std::vector<char>(n + 1, 0));
      fwd[0][w.from] = 1;
      for (int t = 1; t <= m; ++t)
        for (int a = w.from; a <= w.to; ++a)
          if (fwd[t - 1][a])
            for (int b = a; b <= w.to; ++b)
              if (matches(rhs[t - 1], a, b)) fwd[t][b] = 1;
      if (!fwd[m][w.to]) continue;
      bwd[m][w.to] = 1;
      for (int t = m; t >= 1; --t)
        for (int b = w.from; b <= w.to; ++b)
          if (bwd[t][b])
            for (int a = w.from; a <= b; ++a)
              if (matches(rhs[t - 1], a, b)) bwd[t - 1][a] = 1;
      for (int t = 1; t <= m; ++t) {
        if (!rhs[t - 1].is_nonterminal()) continue;
        for (int a = w.from; a < w.to; ++a) {
          if (!fwd[t - 1][a]) continue;
          for (int b = a + 1; b <= w.to; ++b) {
            if (!bwd[t][b] || !matches(rhs[t - 1], a, b)) continue;
            Span child{rhs[t - 1].id, a, b};
            if (child.label == w.label && a == w.from && b == w.to) continue;
            consumed.insert(child);
          }
        }
      }
    }
  }
  return consumed;
}

}  // namespace

std::vector<PartialParse> collect_partial_parses(const ParseResult& r, int final_set) {
  const Grammar& g = *r.grammar;
  const auto& chart = r.chart;
  const int n = static_cast<int>(chart.input.size());
  std::vector<int> toks;
  for (const auto& t : chart.input) toks.push_back(g.find_terminal(t).value_or(-1));

  std::set<Span> cons;
  for (int i = 1; i <= n; ++i)
    for (const auto& s : chart.sets[chart.positions[i]].states())
      if (s.key.kind == StateKind::Seed && s.key.dot == 1 && s.key.start < i && s.gamma > 0.0)
        cons.insert({s.key.target, s.key.start, i});
  auto consumed = consumed_constituents(g, r.tables->eps, cons, toks);

  std::vector<PartialParse> out;
  const auto& fset = chart.sets[final_set];
  for (int idx = 0; idx < fset.size(); ++idx) {
    const auto& s = fset[idx];
    if (s.key.kind != StateKind::Wildcard || s.key.seen.empty() || !(s.gamma > 0.0)) continue;
    PartialParse pp;
    for (int x : s.key.seen) pp.labels.push_back(g.nonterminal_name(x));
    pp.inner_prob = s.gamma;
    pp.viterbi_prob = s.viterbi;
    std::vector<int> splits{n};
    for (StateRef ref{final_set, idx}; chart.state(ref).link.kind == ViterbiLink::Kind::Complete;) {
      ref = chart.state(ref).link.pred;
      splits.push_back(chart.sets[ref.set].position());
    }
    pp.split_points.assign(splits.rbegin(), splits.rend());

    // Maximal iff the label sequence tiles the input with unconsumed constituents.
    std::set<int> reach{0};
    for (int x : s.key.seen) {
      std::set<int> next;
      for (int a : reach)
        for (int b = a + 1; b <= n; ++b)
          if (cons.count({x, a, b}) && !consumed.count({x, a, b})) next.insert(b);
      reach = std::move(next);
    }
    pp.maximal = reach.count(n) > 0;
    out.push_back(std::move(pp));
  }
  return out;
}

}  // namespace detail

}  // namespace scfg
