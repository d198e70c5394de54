#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "scfg/closures.hpp"
#include "support/fixtures.hpp"

using namespace scfg;
using scfg::testing::near;

TEST_CASE("left-corner closure of the binary grammar") {
  for (double p : {0.2, 0.6, 0.9}) {
    auto t = build_closure_tables(scfg::testing::binary_grammar(p));
    CHECK(near(t.pl.at(0, 0), 1 - p, 1e-15));
    CHECK(near(t.rl.at(0, 0), 1 / p, 1e-12));
    CHECK(t.pu.row_empty(0));
    CHECK(near(t.ru.at(0, 0), 1.0, 1e-15));
  }
}

TEST_CASE("unit closure of the unit-cycle grammar") {
  for (double p : {0.3, 0.5, 0.9}) {
    Grammar g = scfg::testing::unit_cycle_grammar(p);
    auto t = build_closure_tables(g);
    const int s = *g.find_nonterminal("S"), u = *g.find_nonterminal("T");
    const double q = 1 - p;
    CHECK(near(t.pu.at(s, u), q, 1e-15));
    CHECK(near(t.pu.at(u, s), 1.0, 1e-15));
    // (I - [[0, q], [1, 0]])^-1 = [[1, q], [1, 1]] / (1 - q)
    CHECK(near(t.ru.at(s, s), 1 / p, 1e-12));
    CHECK(near(t.ru.at(s, u), q / p, 1e-12));
    CHECK(near(t.ru.at(u, s), 1 / p, 1e-12));
    CHECK(near(t.ru.at(u, u), 1 / p, 1e-12));
    CHECK(near(t.ru_by_column.at(u, s), t.ru.at(s, u), 0.0));
  }
}

TEST_CASE("epsilon probabilities") {
  Grammar g = parse_grammar("S -> S S [0.3]\nS -> [0.2]\nS -> a [0.5]\n");
  auto e = epsilon_probs(g);
  CHECK(e.converged);
  // least root of 0.3 e^2 - e + 0.2 = 0
  CHECK(near(e.e[0], (1 - std::sqrt(1 - 0.24)) / 0.6, 1e-13));

  g = parse_grammar("S -> A B [1]\nA -> a [0.5]\nA -> [0.5]\nB -> b [1]\n");
  e = epsilon_probs(g);
  CHECK(e.e[*g.find_nonterminal("S")] == 0.0);
  CHECK(e.e[*g.find_nonterminal("A")] == 0.5);
  CHECK(!e.nullable(*g.find_nonterminal("B")));
}

TEST_CASE("left corners through nullable prefixes") {
  Grammar g = parse_grammar("S -> A B [1]\nA -> a [0.5]\nA -> [0.5]\nB -> b [1]\n");
  auto t = build_closure_tables(g);
  const int s = *g.find_nonterminal("S"), a = *g.find_nonterminal("A"),
            b = *g.find_nonterminal("B");
  CHECK(near(t.pl.at(s, a), 1.0, 1e-15));
  CHECK(near(t.pl.at(s, b), 0.5, 1e-15));
  CHECK(t.rlt.at(s, *g.find_terminal("a")));
  CHECK(t.rlt.at(s, *g.find_terminal("b")));
  CHECK(!t.rlt.at(a, *g.find_terminal("b")));
  CHECK(t.rlt.at(b, *g.find_terminal("b")));
}

TEST_CASE("unit relation through nullable context") {
  Grammar g = parse_grammar("S -> A S [0.5]\nS -> b [0.5]\nA -> a [0.5]\nA -> [0.5]\n");
  auto t = build_closure_tables(g);
  const int s = *g.find_nonterminal("S");
  CHECK(near(t.pu.at(s, s), 0.25, 1e-15));
  CHECK(near(t.ru.at(s, s), 1 / 0.75, 1e-12));
}

TEST_CASE("best epsilon derivation") {
  Grammar g = parse_grammar("S -> A A [0.5]\nS -> a [0.5]\nA -> [0.3]\nA -> S [0.7]\n");
  auto b = best_epsilon(g);
  const int s = *g.find_nonterminal("S"), a = *g.find_nonterminal("A");
  CHECK(near(b.prob[a], 0.3, 1e-15));
  CHECK(near(b.prob[s], 0.5 * 0.09, 1e-15));
  CHECK(b.rule[a] >= 0);
  CHECK(g.productions()[b.rule[a]].is_null());
}

TEST_CASE("reduced inversion equals full inversion") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 8;
    std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
    for (int r = 0; r < n; ++r) {
      if (u(rng) < 0.3) continue;  // empty row
      for (int c = 0; c < n; ++c)
        if (u(rng) < 0.4) d[r][c] = u(rng) / n;
    }
    auto r = closure(NonterminalMatrix::from_dense(d)).to_dense();
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = d[i][j];
    Eigen::MatrixXd full = (Eigen::MatrixXd::Identity(n, n) - m).inverse();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) CHECK(near(r[i][j], full(i, j), 1e-10));
  }
}

TEST_CASE("singular closure is an error") {
  CHECK_THROWS_AS(closure(NonterminalMatrix::from_dense({{1.0}})), ClosureError);
}

TEST_CASE("table dump names every matrix") {
  Grammar g = scfg::testing::unit_cycle_grammar(0.5);
  auto text = dump_tables(g, build_closure_tables(g));
  for (const char* key : {"e", "P_L", "R_L", "P_U", "R_U"}) CHECK(text.find(key) != std::string::npos);
}
