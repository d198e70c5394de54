#include <doctest.h>

#include <algorithm>

#include "scfg/grammar.hpp"
#include "support/fixtures.hpp"

using namespace scfg;
using scfg::testing::near;

TEST_CASE("single rule grammar") {
  Grammar g = parse_grammar("S -> a [1.0]");
  CHECK(g.production_count() == 1);
  CHECK(g.nonterminal_count() == 1);
  CHECK(g.terminal_count() == 1);
  CHECK(g.nonterminal_name(g.start()) == "S");
  CHECK(g.find_terminal("a").has_value());
}

TEST_CASE("tiny English grammar") {
  Grammar g = scfg::testing::tiny_english();
  CHECK(g.production_count() == 13);
  std::vector<std::string> nts;
  for (int x = 0; x < g.nonterminal_count(); ++x) nts.push_back(g.nonterminal_name(x));
  std::sort(nts.begin(), nts.end());
  CHECK(nts == std::vector<std::string>{"Det", "N", "NP", "P", "PP", "S", "VI", "VP", "VT"});
  CHECK(g.terminal_count() == 8);
  CHECK(validate(g).proper());
}

TEST_CASE("binary grammar text") {
  Grammar g = parse_grammar("S -> a [0.6]\nS -> S S [0.4]\n");
  REQUIRE(g.production_count() == 2);
  CHECK(g.productions()[0].prob == 0.6);
  CHECK(g.productions()[1].rhs.size() == 2);
  CHECK(g.productions()[1].rhs[0].is_nonterminal());
}

TEST_CASE("comments, start directive and null rules") {
  Grammar g = parse_grammar("# header\n%start B\nA -> x [1]\nB -> A B [0.5]  # tail\nB -> [0.5]\n");
  CHECK(g.nonterminal_name(g.start()) == "B");
  CHECK(g.has_null_productions());
  CHECK(g.production_count() == 3);
}

TEST_CASE("syntax errors carry line numbers") {
  try {
    parse_grammar("S -> a [1]\nS a [0.5]\n");
    FAIL("expected error");
  } catch (const GrammarError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_grammar("S -> a [abc]"), GrammarError);
  CHECK_THROWS_AS(parse_grammar("S -> a"), GrammarError);
}

TEST_CASE("probability range") {
  CHECK_THROWS_AS(parse_grammar("S -> a [0]"), GrammarError);
  CHECK_THROWS_AS(parse_grammar("S -> a [-0.5]"), GrammarError);
  CHECK_THROWS_AS(parse_grammar("S -> a [1.5]"), GrammarError);
  LoadOptions lo;
  lo.allow_unnormalized = true;
  CHECK_NOTHROW(parse_grammar("S -> a [1.5]", lo));
}

TEST_CASE("duplicate rules") {
  Grammar g = parse_grammar("S -> a [0.25]\nS -> a [0.25]\nS -> b [0.5]\n");
  CHECK(g.production_count() == 2);
  CHECK(near(g.productions()[0].prob, 0.5, 1e-15));
  LoadOptions lo;
  lo.merge_duplicates = false;
  CHECK_THROWS_AS(parse_grammar("S -> a [0.25]\nS -> a [0.25]\nS -> b [0.5]\n", lo), GrammarError);
}

TEST_CASE("text round trip") {
  Grammar g = scfg::testing::tiny_english();
  Grammar h = parse_grammar(to_text(g));
  REQUIRE(h.production_count() == g.production_count());
  for (int i = 0; i < g.production_count(); ++i) {
    CHECK(format_production(g, g.productions()[i]) == format_production(h, h.productions()[i]));
    CHECK(g.productions()[i].prob == h.productions()[i].prob);
  }
}

TEST_CASE("validate") {
  auto d = validate(scfg::testing::binary_grammar(0.3));
  CHECK(d.improper_lhs.empty());
  CHECK(d.useless.empty());

  d = validate(parse_grammar("S -> a [0.5]"));
  REQUIRE(d.improper_lhs.size() == 1);
  CHECK(d.improper_lhs[0].nonterminal == 0);
  CHECK(near(d.improper_lhs[0].sum, 0.5, 1e-15));

  // Inconsistent for q >= 1/2, yet the left-corner radius is p < 1.
  d = validate(scfg::testing::binary_grammar(0.4));
  CHECK(d.proper());
  CHECK(near(d.left_corner_radius, 0.6, 1e-9));
  CHECK(d.consistency_estimate < 1.0);
}

TEST_CASE("useless nonterminals") {
  Grammar g = parse_grammar("S -> a [0.5]\nS -> B [0.5]\nB -> B b [1]\nC -> c [1]\n");
  auto d = validate(g);
  std::vector<std::string> names;
  for (int x : d.useless) names.push_back(g.nonterminal_name(x));
  std::sort(names.begin(), names.end());
  CHECK(names == std::vector<std::string>{"B", "C"});
}

TEST_CASE("strict loading rejects improper grammars") {
  LoadOptions lo;
  lo.strict = true;
  CHECK_THROWS_AS(parse_grammar("S -> a [0.5]", lo), GrammarError);
  std::vector<std::string> warnings;
  CHECK_NOTHROW(parse_grammar("S -> a [0.5]", {}, &warnings));
  CHECK(!warnings.empty());
}

TEST_CASE("renormalize") {
  LoadOptions lo;
  lo.allow_unnormalized = true;
  Grammar g = renormalize(parse_grammar("S -> a [2]\nS -> S S [6]\n", lo));
  CHECK(near(g.productions()[0].prob, 0.25, 1e-15));
  CHECK(near(g.productions()[1].prob, 0.75, 1e-15));
}

TEST_CASE("eliminate_null on a small grammar") {
  Grammar g = parse_grammar("S -> A b [1]\nA -> a [0.4]\nA -> [0.6]\n");
  Grammar h = eliminate_null(g);
  CHECK(!h.has_null_productions());
  auto b_only = h.find_production(h.start(), std::vector<Symbol>{Symbol::terminal(*h.find_terminal("b"))});
  REQUIRE(b_only.has_value());
  CHECK(near(h.productions()[*b_only].prob, 0.6, 1e-15));
  CHECK(validate(h).proper());
}

TEST_CASE("eliminate_null with nullable start keeps a fresh start rule") {
  Grammar g = parse_grammar("S -> a S [0.5]\nS -> [0.5]\n");
  Grammar h = eliminate_null(g);
  int nulls = 0;
  for (const auto& p : h.productions())
    if (p.is_null()) {
      ++nulls;
      CHECK(p.lhs == h.start());
      CHECK(near(p.prob, 0.5, 1e-15));
    }
  CHECK(nulls == 1);
  CHECK_THROWS_AS(eliminate_null(parse_grammar("S -> [1]")), GrammarError);
}

TEST_CASE("spectral radius estimate") {
  CHECK(near(spectral_radius_estimate({{0.5, 0.0}, {0.0, 0.25}}), 0.5, 1e-9));
  CHECK(near(spectral_radius_estimate({{0.0, 1.0}, {0.25, 0.0}}), 0.5, 1e-6));
}
