#include <doctest.h>

#include <cmath>
#include <random>

#include "scfg/oracle.hpp"
#include "scfg/parser.hpp"
#include "support/fixtures.hpp"
#include "support/random_grammar.hpp"

using namespace scfg;
using scfg::testing::near;

namespace {
std::vector<std::string> words(std::initializer_list<const char*> w) { return {w.begin(), w.end()}; }
}  // namespace

TEST_CASE("enumeration of the binary grammar") {
  const double p = 0.6, q = 0.4;
  Grammar g = scfg::testing::binary_grammar(p);
  OracleConfig oc;
  oc.max_len = 4;
  oc.keep_derivations = true;
  auto o = enumerate(g, oc);
  const double catalan[] = {1, 1, 2, 5};
  for (int n = 1; n <= 4; ++n) {
    std::vector<std::string> x(n, "a");
    CHECK(near(oracle_string_prob(g, o, x), catalan[n - 1] * std::pow(p, n) * std::pow(q, n - 1),
               1e-12));
    CHECK(o.yields.at(std::vector<int>(n, 0)).derivations == catalan[n - 1]);
  }
  CHECK(near(oracle_prefix_prob(g, o, words({"a", "a"})), q,
             1e-9 + oracle_prefix_residual(g, o, words({"a", "a"}))));
  auto c = oracle_expected_counts(g, o, words({"a", "a", "a"}));
  CHECK(near(c[0], 3, 1e-12));
  CHECK(near(c[1], 2, 1e-12));
  CHECK(oracle_string_prob(g, o, words({"b"})) == 0.0);
  CHECK(!OracleResult::ids(g, words({"b"})).has_value());
}

TEST_CASE("derivation trees and spans") {
  Grammar g = scfg::testing::binary_grammar(0.5);
  // S -> S S, S -> a, S -> S S, S -> a, S -> a
  ParseTree t = derivation_tree(g, std::vector<int>{1, 0, 1, 0, 0});
  CHECK(t.to_string() == "(S (S a) (S (S a) (S a)))");
  auto spans = constituent_spans(t);
  std::sort(spans.begin(), spans.end());
  CHECK(spans == std::vector<std::pair<int, int>>{{0, 1}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
  CHECK(near(*tree_probability(g, t), std::pow(0.5, 5), 1e-15));
}

TEST_CASE("oracle viterbi") {
  Grammar g = scfg::testing::tiny_english();
  OracleConfig oc;
  oc.max_len = 6;
  auto o = enumerate(g, oc);
  auto best = oracle_viterbi(g, o, words({"a", "circle", "is", "below", "a", "square"}));
  REQUIRE(best.has_value());
  CHECK(near(best->second, 1.0 / 36, 1e-15));
  CHECK(!oracle_viterbi(g, o, words({"a", "circle"})).has_value());
}

TEST_CASE("expansion cap") {
  Grammar g = scfg::testing::binary_grammar(0.5);
  OracleConfig oc;
  oc.max_len = 5;
  oc.max_expansions = 100;
  CHECK_THROWS_AS(enumerate(g, oc), OracleError);
}

TEST_CASE("parser agrees with enumeration on random grammars") {
  std::mt19937_64 rng(3);
  scfg::testing::RandomGrammarOptions go;
  go.max_offspring_radius = 0.6;
  OracleConfig oc;
  oc.max_len = 4;
  oc.max_expansions = 4'000'000;
  int checked = 0;
  while (checked < 30) {
    Grammar g = scfg::testing::random_grammar(rng, go);
    OracleResult o;
    try {
      o = enumerate(g, oc);
    } catch (const OracleError&) {
      continue;
    }
    ++checked;
    Parser parser(g);
    for (const auto& x : scfg::testing::all_strings(g, 1, 4)) {
      auto r = parser.parse(x);
      CHECK(near(r.sentence_prob, oracle_string_prob(g, o, x),
                 1e-9 + oracle_string_residual(g, o, x)));
      for (size_t k = 0; k < x.size(); ++k) {
        std::vector<std::string> pre(x.begin(), x.begin() + k + 1);
        CHECK(near(r.prefix_probs[k], oracle_prefix_prob(g, o, pre),
                   1e-7 + oracle_prefix_residual(g, o, pre)));
      }
    }
  }
}
