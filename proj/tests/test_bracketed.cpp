#include <doctest.h>

#include <random>

#include "scfg/oracle.hpp"
#include "scfg/parser.hpp"
#include "support/brackets.hpp"
#include "support/fixtures.hpp"
#include "support/random_grammar.hpp"

using namespace scfg;
using scfg::testing::near;

TEST_CASE("bracketed binary strings") {
  const double p = 0.6, q = 0.4;
  Parser parser(scfg::testing::binary_grammar(p));
  auto r = parser.parse(tokenize("a ( a a ) a"));
  CHECK(r.accepted);
  CHECK(near(r.sentence_prob, 2 * std::pow(p, 4) * std::pow(q, 3), 1e-15));
  r = parser.parse(tokenize("( a ( a a ) )"));
  CHECK(near(r.sentence_prob, p * p * p * q * q, 1e-15));
  r = parser.parse_bracketed(tokenize("(a a) a"));
  CHECK(near(r.sentence_prob, p * p * p * q * q, 1e-15));
  r = parser.parse(tokenize("((a a) a)"));
  CHECK(near(r.sentence_prob, p * p * p * q * q, 1e-15));
  CHECK(near(*r.viterbi_prob, p * p * p * q * q, 1e-15));
  CHECK(r.viterbi_tree->to_string() == "(S (S (S a) (S a)) (S a))");
}

TEST_CASE("brackets that cross every parse reject") {
  Parser parser(scfg::testing::tiny_english());
  auto r = parser.parse(tokenize("a (circle touches) a triangle"));
  CHECK(!r.accepted);
  CHECK(r.sentence_prob == 0.0);
  r = parser.parse(tokenize("(a circle) (touches (a triangle))"));
  CHECK(r.accepted);
  CHECK(near(r.sentence_prob, 1.0 / 18, 1e-15));
}

TEST_CASE("malformed brackets") {
  Parser parser(scfg::testing::binary_grammar(0.5));
  CHECK_THROWS_AS(parser.parse(tokenize("( a a")), ParseError);
  CHECK_THROWS_AS(parser.parse(tokenize("a ) a")), ParseError);
  CHECK_THROWS_AS(parser.parse(tokenize("a ( ) a")), ParseError);
  CHECK_THROWS_AS(parser.parse_robust(tokenize("( a )")), ParseError);
}

TEST_CASE("bracketed probability is the consistent-derivation mass") {
  std::mt19937_64 rng(31);
  scfg::testing::RandomGrammarOptions go;
  go.max_offspring_radius = 0.6;
  OracleConfig oc;
  oc.max_len = 4;
  oc.max_expansions = 4'000'000;
  oc.keep_derivations = true;
  int checked = 0;
  while (checked < 10) {
    Grammar g = scfg::testing::random_grammar(rng, go);
    OracleResult o;
    try {
      o = enumerate(g, oc);
    } catch (const OracleError&) {
      continue;
    }
    int multi = 0;
    for (const auto& [ids, y] : o.yields) multi += ids.size() >= 2;
    if (multi < 4) continue;
    ++checked;
    Parser parser(g);
    for (const auto& [ids, y] : o.yields) {
      if (ids.size() < 2 || y.all.empty()) continue;
      // The fully bracketed most probable tree, and each of its spans alone.
      ParseTree t = derivation_tree(g, y.viterbi_rules);
      std::vector<std::vector<std::string>> variants{scfg::testing::bracketize(t)};
      for (auto [from, to] : constituent_spans(t))
        if (to > from) variants.push_back(scfg::testing::with_bracket(t.yield(), from, to));
      for (const auto& tokens : variants) {
        auto [spans, plain] = scfg::testing::bracket_spans(tokens);
        double expected = 0.0;
        for (const auto& d : y.all)
          if (scfg::testing::consistent(g, d, spans)) expected += d.prob;
        auto r = parser.parse(tokens);
        CHECK(near(r.sentence_prob, expected, 1e-9 + oracle_string_residual(g, o, plain)));
        CHECK(r.sentence_prob <= parser.parse(plain).sentence_prob + 1e-12);
      }
    }
  }
}
