#pragma once

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "scfg/grammar.hpp"
#include "scfg/parser.hpp"

namespace scfg {

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OracleConfig {
  int max_len = 5;
  // Partial derivations that could still yield a string within max_len are
  // cut below mass_tol * 1e-3; those that only matter for prefixes are cut
  // below prefix_tol.
  double mass_tol = 1e-12;
  double prefix_tol = 1e-12;
  long max_expansions = 20'000'000;
  bool keep_derivations = false;
};

struct Derivation {
  std::vector<int> rules;  // leftmost order
  double prob = 0.0;
};

struct OracleYield {
  double prob = 0.0;
  double viterbi_prob = 0.0;
  std::vector<int> viterbi_rules;
  std::vector<double> counts;  // sum over derivations of P(d) * uses of each rule
  long derivations = 0;
  std::vector<Derivation> all;  // filled when keep_derivations is set
};

struct OracleResult {
  std::map<std::vector<int>, OracleYield> yields;  // keyed by terminal ids
  std::map<std::vector<int>, double> prefixes;
  double residual = 0.0;         // bound on mass missing from any string probability
  double prefix_residual = 0.0;  // bound on mass missing from any prefix probability
  long expansions = 0;
  // Pruned mass keyed by the terminal prefix already generated when the cut
  // happened; only strings extending that prefix can be affected.
  std::map<std::vector<int>, double> string_cut;
  std::map<std::vector<int>, double> prefix_cut;

  // Terminal ids for tokens; nullopt if some token is not a terminal of g.
  static std::optional<std::vector<int>> ids(const Grammar& g, std::span<const std::string> x);
};

OracleResult enumerate(const Grammar& g, const OracleConfig& cfg = {});

double oracle_string_prob(const Grammar& g, const OracleResult& r, std::span<const std::string> x);
double oracle_prefix_prob(const Grammar& g, const OracleResult& r, std::span<const std::string> x);
// Bounds on the enumeration error of the two values above for this x.
double oracle_string_residual(const Grammar& g, const OracleResult& r,
                              std::span<const std::string> x);
double oracle_prefix_residual(const Grammar& g, const OracleResult& r,
                              std::span<const std::string> x);
// Expected uses of each rule given x (posterior-weighted tallies).
std::vector<double> oracle_expected_counts(const Grammar& g, const OracleResult& r,
                                           std::span<const std::string> x);
// Most probable derivation; nullopt when x has none.
std::optional<std::pair<ParseTree, double>> oracle_viterbi(const Grammar& g,
                                                           const OracleResult& r,
                                                           std::span<const std::string> x);

ParseTree derivation_tree(const Grammar& g, std::span<const int> leftmost_rules);

// Input spans [from, to) of all nonterminal nodes of t.
std::vector<std::pair<int, int>> constituent_spans(const ParseTree& t);

}  // namespace scfg
