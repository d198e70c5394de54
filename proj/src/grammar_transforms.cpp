#include <algorithm>
#include <cmath>

#include "scfg/closures.hpp"
#include "scfg/grammar.hpp"

namespace scfg {

GrammarDiagnostics validate(const Grammar& g) {
  GrammarDiagnostics d;
  const int n = g.nonterminal_count();

  std::vector<double> sums(n, 0.0);
  for (const auto& p : g.productions()) sums[p.lhs] += p.prob;
  for (int x = 0; x < n; ++x)
    if (std::abs(sums[x] - 1.0) > kProperTolerance) d.improper_lhs.push_back({x, sums[x]});

  // Productive: derives some terminal string. Useful: productive and reachable
  // from the start through rules whose symbols are all productive.
  std::vector<bool> productive(n, false);
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& p : g.productions()) {
      if (productive[p.lhs]) continue;
      if (std::all_of(p.rhs.begin(), p.rhs.end(),
                      [&](Symbol s) { return s.is_terminal() || productive[s.id]; }))
        productive[p.lhs] = changed = true;
    }
  }
  std::vector<bool> useful(n, false);
  std::vector<int> stack;
  if (productive[g.start()]) {
    useful[g.start()] = true;
    stack.push_back(g.start());
  }
  while (!stack.empty()) {
    int x = stack.back();
    stack.pop_back();
    for (int id : g.productions_of(x)) {
      const auto& p = g.production(id);
      if (!std::all_of(p.rhs.begin(), p.rhs.end(),
                       [&](Symbol s) { return s.is_terminal() || productive[s.id]; }))
        continue;
      for (auto s : p.rhs)
        if (s.is_nonterminal() && !useful[s.id]) {
          useful[s.id] = true;
          stack.push_back(s.id);
        }
    }
  }
  for (int x = 0; x < n; ++x)
    if (!useful[x]) d.useless.push_back(x);

  auto eps = epsilon_probs(g);
  d.null_start = eps.nullable(g.start());
  d.left_corner_radius = spectral_radius_estimate(left_corner_matrix(g, eps).to_dense());
  d.unit_radius = spectral_radius_estimate(unit_matrix(g, eps).to_dense());
  d.consistency_estimate = std::max(d.left_corner_radius, d.unit_radius);
  return d;
}

namespace {

struct Variant {
  std::vector<Symbol> rhs;
  double prob;
};

// All ways of deleting nullable nonterminals from rhs. A kept occurrence of Y
// carries 1 - e_Y, a deleted one e_Y.
void expand_variants(const Production& p, const EpsilonProbs& eps,
                     const std::vector<bool>& nonempty, size_t pos, std::vector<Symbol>& cur,
                     double prob, std::vector<Variant>& out) {
  if (prob == 0.0) return;
  if (pos == p.rhs.size()) {
    out.push_back({cur, prob});
    return;
  }
  Symbol s = p.rhs[pos];
  if (s.is_terminal() || !eps.nullable(s.id)) {
    cur.push_back(s);
    expand_variants(p, eps, nonempty, pos + 1, cur, prob, out);
    cur.pop_back();
    return;
  }
  double e = eps.e[s.id];
  if (nonempty[s.id]) {
    cur.push_back(s);
    expand_variants(p, eps, nonempty, pos + 1, cur, prob * (1.0 - e), out);
    cur.pop_back();
  }
  expand_variants(p, eps, nonempty, pos + 1, cur, prob * e, out);
}

}  // namespace

Grammar eliminate_null(const Grammar& g) {
  auto eps = epsilon_probs(g);
  auto nonempty = derives_nonempty(g);
  if (!nonempty[g.start()])
    throw GrammarError("start symbol " + g.nonterminal_name(g.start()) +
                       " derives only the empty string");
  if (!g.has_null_productions()) return g;

  std::vector<Variant> variants;
  std::vector<int> variant_lhs;
  for (const auto& p : g.productions()) {
    if (!nonempty[p.lhs]) continue;
    std::vector<Variant> vs;
    std::vector<Symbol> cur;
    expand_variants(p, eps, nonempty, 0, cur, p.prob, vs);
    for (auto& v : vs) {
      if (v.rhs.empty()) continue;
      variants.push_back(std::move(v));
      variant_lhs.push_back(p.lhs);
    }
  }
  std::vector<double> sums(g.nonterminal_count(), 0.0);
  for (size_t i = 0; i < variants.size(); ++i) sums[variant_lhs[i]] += variants[i].prob;

  GrammarBuilder b(GrammarBuilder::Options{true, false});
  const double e_start = eps.e[g.start()];
  std::string start_name = g.nonterminal_name(g.start());
  if (e_start > 0.0) {
    std::string fresh = start_name + "'";
    while (g.find_nonterminal(fresh) || g.find_terminal(fresh)) fresh += "'";
    b.add(fresh, {start_name}, 1.0 - e_start);
    b.add(fresh, {}, e_start);
    b.set_start(fresh);
  } else {
    b.set_start(start_name);
  }
  for (size_t i = 0; i < variants.size(); ++i) {
    std::vector<std::string> rhs;
    for (auto s : variants[i].rhs) rhs.push_back(g.symbol_name(s));
    b.add(g.nonterminal_name(variant_lhs[i]), std::move(rhs),
          variants[i].prob / sums[variant_lhs[i]]);
  }
  for (int t = 0; t < g.terminal_count(); ++t) b.declare_terminal(g.terminal_name(t));
  return b.build();
}

}  // namespace scfg
