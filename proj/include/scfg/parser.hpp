#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "scfg/chart.hpp"
#include "scfg/closures.hpp"
#include "scfg/grammar.hpp"

namespace scfg {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kOpenBracket = "(";
inline constexpr const char* kCloseBracket = ")";

struct PruneOptions {
  enum class Mode { Off, Beam, Relative };
  Mode mode = Mode::Off;
  int beam = 0;           // Beam: keep this many states per set
  double relative = 0.0;  // Relative: drop states with alpha < relative * max alpha

  bool enabled() const { return mode != Mode::Off; }
};

struct ParseOptions {
  bool filter = true;  // bottom-up filtering of predictions through R_LT
  bool compute_viterbi = true;
  bool record_derivations = false;  // keep the inner-probability tape for estimation
  PruneOptions prune;
};

struct ParseTree {
  std::string label;
  bool terminal = false;
  std::vector<ParseTree> children;

  // Nested parenthesized form, e.g. (S (S a) (S a)).
  std::string to_string() const;
  std::vector<std::string> yield() const;
};

// Product of the rule probabilities used in the tree; nullopt if some node
// does not match a production of g.
std::optional<double> tree_probability(const Grammar& g, const ParseTree& t);

struct PartialParse {
  std::vector<std::string> labels;
  std::vector<int> split_points;  // boundaries 0 = s0 < s1 < ... < sm = length
  double inner_prob = 0.0;
  double viterbi_prob = 0.0;
  bool maximal = false;
};

// One accumulation step of the inner-probability computation, recorded so
// that outer probabilities can be obtained by a reverse sweep.
struct TapeOp {
  enum class Kind : std::uint8_t {
    Leaf,     // g(t) += P(rule) * prod e
    Scan,     // g(t), u(t) += g(a) * prod e
    Copy,     // g(t) += g(a); u(t) += u(a)
    Shift,    // g(t) += g(a) * prod e
    Product,  // g(t) [and u(t)] += g(a) * u(b) * R_U(z, y) * prod e
  };
  Kind kind = Kind::Leaf;
  bool add_nonunit = false;
  StateRef target, a, b;
  int rule = -1;
  int z = -1, y = -1;
  std::vector<int> eps;  // nullable nonterminals whose e factors multiply in
};

struct ParseResult {
  std::shared_ptr<const Grammar> grammar;
  std::shared_ptr<const ClosureTables> tables;
  Chart chart;
  std::vector<double> prefix_probs;  // entry t: P(S =>*_L x_0 .. x_t)
  double sentence_prob = 0.0;
  bool accepted = false;
  bool approximate = false;  // pruning was active
  bool robust = false;
  std::optional<double> viterbi_prob;
  std::optional<ParseTree> viterbi_tree;
  std::vector<PartialParse> partial_parses;
  StateRef final_state;
  std::vector<TapeOp> tape;
  bool has_tape = false;
  bool has_viterbi = false;
  std::vector<std::string> warnings;

  std::size_t state_count() const;
  std::size_t predicted_state_count() const;
};

class Parser {
 public:
  explicit Parser(Grammar g);
  Parser(std::shared_ptr<const Grammar> g, std::shared_ptr<const ClosureTables> tables);

  const Grammar& grammar() const { return *grammar_; }
  const ClosureTables& tables() const { return *tables_; }
  std::shared_ptr<const Grammar> grammar_ptr() const { return grammar_; }
  std::shared_ptr<const ClosureTables> tables_ptr() const { return tables_; }

  // Bracket markers in tokens are honored (see parse_bracketed).
  ParseResult parse(std::span<const std::string> tokens, const ParseOptions& options = {}) const;
  // Only derivations in which every bracketed span is a constituent count.
  ParseResult parse_bracketed(std::span<const std::string> tokens,
                              const ParseOptions& options = {}) const;
  ParseResult parse_robust(std::span<const std::string> tokens,
                           const ParseOptions& options = {}) const;

  // P(a | prefix) for every terminal a with nonzero probability.
  std::map<std::string, double> next_word_distribution(std::span<const std::string> prefix) const;

 private:
  std::shared_ptr<const Grammar> grammar_;
  std::shared_ptr<const ClosureTables> tables_;
};

// Sum of inner probabilities of complete states k X -> nu . at position i.
double substring_probability(const ParseResult& r, int x, int k, int i);
double substring_probability(const ParseResult& r, const std::string& x, int k, int i);

std::pair<ParseTree, double> viterbi_parse(const ParseResult& r);

std::vector<std::string> tokenize(const std::string& line);

}  // namespace scfg
