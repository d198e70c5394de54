#include <doctest.h>

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

TEST_CASE("viterbi parse of aaa") {
  const double p = 0.6, q = 0.4;
  Grammar g = scfg::testing::binary_grammar(p);
  Parser parser(g);
  auto r = parser.parse(words({"a", "a", "a"}));
  REQUIRE(r.viterbi_prob.has_value());
  CHECK(near(*r.viterbi_prob, p * p * p * q * q, 1e-15));
  auto [tree, prob] = viterbi_parse(r);
  CHECK(prob == *r.viterbi_prob);
  CHECK(tree.yield() == words({"a", "a", "a"}));
  CHECK(near(*tree_probability(g, tree), prob, 1e-15));
  CHECK(r.viterbi_tree->to_string() == tree.to_string());
}

TEST_CASE("viterbi tree for the tiny English sentence") {
  Grammar g = scfg::testing::tiny_english();
  Parser parser(g);
  auto r = parser.parse(words({"a", "square", "is", "above", "a", "circle"}));
  REQUIRE(r.viterbi_tree.has_value());
  CHECK(r.viterbi_tree->to_string() ==
        "(S (NP (Det a) (N square)) (VP (VI is) (PP (P above) (NP (Det a) (N circle)))))");
  CHECK(near(*r.viterbi_prob, 1.0 / 3 * 0.5 * 0.5 * (1.0 / 3), 1e-15));
}

TEST_CASE("viterbi through unit cycles takes the direct rule") {
  for (double p : {0.3, 0.9}) {
    Grammar g = scfg::testing::unit_cycle_grammar(p);
    auto r = Parser(g).parse(words({"a"}));
    CHECK(near(*r.viterbi_prob, p, 1e-15));
    CHECK(r.viterbi_tree->to_string() == "(S a)");
  }
}

TEST_CASE("viterbi over nullable symbols") {
  Grammar g = parse_grammar("S -> A b A [1]\nA -> a [0.4]\nA -> [0.6]\n");
  auto r = Parser(g).parse(words({"b"}));
  CHECK(near(*r.viterbi_prob, 0.36, 1e-15));
  CHECK(r.viterbi_tree->to_string() == "(S (A) b (A))");
  CHECK(near(*tree_probability(g, *r.viterbi_tree), 0.36, 1e-15));
}

TEST_CASE("viterbi of rejected input") {
  auto r = Parser(scfg::testing::tiny_english()).parse(words({"a", "circle"}));
  CHECK(!r.viterbi_prob.has_value());
  CHECK_THROWS_AS(viterbi_parse(r), ParseError);
}

TEST_CASE("viterbi matches enumeration") {
  std::mt19937_64 rng(5);
  scfg::testing::RandomGrammarOptions go;
  go.max_offspring_radius = 0.6;
  OracleConfig oc;
  oc.max_len = 4;
  oc.max_expansions = 4'000'000;
  int checked = 0;
  while (checked < 20) {
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
      auto best = oracle_viterbi(g, o, x);
      CHECK(r.viterbi_prob.has_value() == best.has_value());
      if (!best || !r.viterbi_prob) continue;
      CHECK(near(*r.viterbi_prob, best->second, 1e-9));
      CHECK(near(*tree_probability(g, *r.viterbi_tree), *r.viterbi_prob, 1e-15));
      CHECK(r.viterbi_tree->yield() == x);
    }
  }
}
