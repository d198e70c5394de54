#include <doctest.h>

#include <algorithm>

#include "scfg/parser.hpp"
#include "support/fixtures.hpp"

using namespace scfg;
using scfg::testing::near;

namespace {

std::vector<std::string> labels_of(const std::vector<PartialParse>& ps, bool maximal_only) {
  std::vector<std::string> out;
  for (const auto& p : ps) {
    if (maximal_only && !p.maximal) continue;
    std::string s;
    for (const auto& l : p.labels) s += (s.empty() ? "" : " ") + l;
    out.push_back(s);
  }
  std::sort(out.begin(), out.end());
  return out;
}

const PartialParse* find(const std::vector<PartialParse>& ps, const std::string& labels) {
  for (const auto& p : ps) {
    std::string s;
    for (const auto& l : p.labels) s += (s.empty() ? "" : " ") + l;
    if (s == labels) return &p;
  }
  return nullptr;
}

}  // namespace

TEST_CASE("partial parses of an ungrammatical sentence") {
  Parser parser(scfg::testing::tiny_english());
  auto r = parser.parse_robust(tokenize("a circle touches above a square"));
  CHECK(!r.accepted);
  CHECK(r.robust);
  CHECK(labels_of(r.partial_parses, true) == std::vector<std::string>{"NP VT PP"});
  auto all = labels_of(r.partial_parses, false);
  CHECK(std::count(all.begin(), all.end(), "Det N VT P NP") == 1);
  CHECK(std::count(all.begin(), all.end(), "Det N VT P Det N") == 1);
  CHECK(std::count(all.begin(), all.end(), "NP VT PP") == 1);

  const auto* best = find(r.partial_parses, "NP VT PP");
  REQUIRE(best != nullptr);
  CHECK(best->split_points == std::vector<int>{0, 2, 3, 6});
  CHECK(near(best->inner_prob, 1.0 / 3 * 0.5 / 3, 1e-15));
  CHECK(near(best->viterbi_prob, best->inner_prob, 1e-15));
  for (const auto& p : r.partial_parses) {
    CHECK(p.split_points.front() == 0);
    CHECK(p.split_points.back() == 6);
    CHECK(p.split_points.size() == p.labels.size() + 1);
  }
}

TEST_CASE("grammatical input lists the start symbol") {
  Parser parser(scfg::testing::tiny_english());
  auto r = parser.parse_robust(tokenize("a circle touches a triangle"));
  CHECK(r.accepted);
  CHECK(near(r.sentence_prob, 1.0 / 18, 1e-15));
  CHECK(labels_of(r.partial_parses, true) == std::vector<std::string>{"S"});
  CHECK(find(r.partial_parses, "NP VP") != nullptr);
}

TEST_CASE("substring probabilities in robust mode") {
  Parser parser(scfg::testing::tiny_english());
  auto r = parser.parse_robust(tokenize("a circle touches above a square"));
  CHECK(near(substring_probability(r, "PP", 3, 6), 0.5 / 3, 1e-15));
  CHECK(near(substring_probability(r, "NP", 4, 6), 1.0 / 3, 1e-15));
  CHECK(substring_probability(r, "VP", 2, 6) == 0.0);
}

TEST_CASE("unknown words get a fresh preterminal") {
  Parser parser(scfg::testing::tiny_english());
  auto r = parser.parse_robust(tokenize("a circle touches a hexagon"));
  CHECK(!r.accepted);
  CHECK(!r.warnings.empty());
  auto maximal = labels_of(r.partial_parses, true);
  CHECK(maximal == std::vector<std::string>{"NP VT Det UNK_hexagon"});
}

TEST_CASE("robust mode refuses estimation bookkeeping") {
  Parser parser(scfg::testing::tiny_english());
  ParseOptions o;
  o.record_derivations = true;
  CHECK_THROWS_AS(parser.parse_robust(tokenize("a circle"), o), ParseError);
}
