#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "scfg/grammar.hpp"

namespace scfg::testing {

struct RandomGrammarOptions {
  int max_nonterminals = 5;
  int max_terminals = 4;
  int max_rhs = 3;
  int max_rules_per_lhs = 4;
  bool require_null = false;
  bool require_unit = false;
  double max_offspring_radius = 0.8;
};

// Spectral radius of the expected-offspring matrix M[X][Y] = E[#Y in one
// expansion of X]; below 1 means the grammar is consistent.
inline double offspring_radius(const Grammar& g) {
  const int n = g.nonterminal_count();
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
  for (const auto& p : g.productions())
    for (auto s : p.rhs)
      if (s.is_nonterminal()) m[p.lhs][s.id] += p.prob;
  return spectral_radius_estimate(m);
}

inline bool has_unit_rule(const Grammar& g) {
  for (const auto& p : g.productions())
    if (p.is_unit()) return true;
  return false;
}

// Draws proper grammars until one is contracting enough for brute-force
// enumeration. Every nonterminal keeps one all-terminal rule so nothing is
// unproductive.
inline Grammar random_grammar(std::mt19937_64& rng, const RandomGrammarOptions& o = {}) {
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto chance = [&](double p) { return std::uniform_real_distribution<double>(0, 1)(rng) < p; };
  static const char* nt_names[] = {"S", "A", "B", "C", "D", "E", "F", "G"};
  static const char* t_names[] = {"a", "b", "c", "d", "e", "f"};

  for (;;) {
    const int n = uniform(1, o.max_nonterminals);
    const int t = uniform(1, o.max_terminals);
    GrammarBuilder b;
    bool null_done = false, unit_done = false;
    for (int x = 0; x < n; ++x) {
      const int rules = uniform(1, o.max_rules_per_lhs);
      std::vector<std::vector<std::string>> rhss;
      // Guaranteed terminal rule.
      {
        std::vector<std::string> rhs;
        int len = uniform(1, std::min(2, o.max_rhs));
        for (int k = 0; k < len; ++k) rhs.push_back(t_names[uniform(0, t - 1)]);
        rhss.push_back(rhs);
      }
      for (int r = 1; r < rules; ++r) {
        std::vector<std::string> rhs;
        if ((o.require_null && !null_done && x == n - 1 && r == rules - 1) || chance(0.12)) {
          null_done = true;
        } else if ((o.require_unit && !unit_done && n > 1 && x == 0 && r == 1) || chance(0.15)) {
          rhs.push_back(nt_names[uniform(0, n - 1)]);
          unit_done = true;
        } else {
          int len = uniform(1, o.max_rhs);
          for (int k = 0; k < len; ++k)
            rhs.push_back(chance(0.55) ? nt_names[uniform(0, n - 1)] : t_names[uniform(0, t - 1)]);
        }
        rhss.push_back(rhs);
      }
      std::vector<double> w;
      double total = 0.0;
      for (size_t r = 0; r < rhss.size(); ++r) {
        w.push_back(0.1 + std::uniform_real_distribution<double>(0, 1)(rng));
        total += w.back();
      }
      for (size_t r = 0; r < rhss.size(); ++r) b.add(nt_names[x], rhss[r], w[r] / total);
    }
    b.set_start("S");
    Grammar g;
    try {
      g = b.build();
    } catch (const GrammarError&) {
      continue;
    }
    if (o.require_null && !g.has_null_productions()) continue;
    if (o.require_unit && !has_unit_rule(g)) continue;
    if (!(offspring_radius(g) < o.max_offspring_radius)) continue;
    return g;
  }
}

// All strings over the grammar's terminals with length in [min_len, max_len].
inline std::vector<std::vector<std::string>> all_strings(const Grammar& g, int min_len,
                                                         int max_len) {
  std::vector<std::vector<std::string>> out, layer{{}};
  for (int len = 0; len <= max_len; ++len) {
    if (len >= min_len) out.insert(out.end(), layer.begin(), layer.end());
    std::vector<std::vector<std::string>> next;
    for (const auto& s : layer)
      for (int a = 0; a < g.terminal_count(); ++a) {
        auto e = s;
        e.push_back(g.terminal_name(a));
        next.push_back(std::move(e));
      }
    layer = std::move(next);
  }
  return out;
}

}  // namespace scfg::testing
