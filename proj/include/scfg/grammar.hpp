#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace scfg {

// Properness tolerance on per-LHS probability sums.
inline constexpr double kProperTolerance = 1e-6;

struct Symbol {
  enum class Kind : std::uint8_t { Nonterminal, Terminal };

  Kind kind = Kind::Terminal;
  int id = -1;

  static Symbol nonterminal(int id) { return {Kind::Nonterminal, id}; }
  static Symbol terminal(int id) { return {Kind::Terminal, id}; }

  bool is_nonterminal() const { return kind == Kind::Nonterminal; }
  bool is_terminal() const { return kind == Kind::Terminal; }

  friend bool operator==(const Symbol&, const Symbol&) = default;
};

struct Production {
  int lhs = -1;
  std::vector<Symbol> rhs;  // empty for X -> eps
  double prob = 0.0;

  bool is_null() const { return rhs.empty(); }
  bool is_unit() const { return rhs.size() == 1 && rhs[0].is_nonterminal(); }
};

class GrammarError : public std::runtime_error {
 public:
  explicit GrammarError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// An immutable stochastic context-free grammar. Nonterminals and terminals
// are numbered densely from zero within their own kind.
class Grammar {
 public:
  Grammar() = default;

  int nonterminal_count() const { return static_cast<int>(nonterminals_.size()); }
  int terminal_count() const { return static_cast<int>(terminals_.size()); }
  const std::string& nonterminal_name(int id) const { return nonterminals_.at(id); }
  const std::string& terminal_name(int id) const { return terminals_.at(id); }
  std::string symbol_name(Symbol s) const {
    return s.is_nonterminal() ? nonterminal_name(s.id) : terminal_name(s.id);
  }
  std::optional<int> find_nonterminal(std::string_view name) const;
  std::optional<int> find_terminal(std::string_view name) const;

  int start() const { return start_; }
  std::span<const Production> productions() const { return productions_; }
  const Production& production(int id) const { return productions_.at(id); }
  std::span<const int> productions_of(int lhs) const { return by_lhs_.at(lhs); }
  int production_count() const { return static_cast<int>(productions_.size()); }

  // Production id for lhs -> rhs, if present.
  std::optional<int> find_production(int lhs, std::span<const Symbol> rhs) const;

  bool has_null_productions() const;
  // Returns a copy with the given rule probabilities (same order as productions()).
  Grammar with_probabilities(std::span<const double> probs) const;

 private:
  friend class GrammarBuilder;

  std::vector<std::string> nonterminals_;
  std::vector<std::string> terminals_;
  std::unordered_map<std::string, int> nonterminal_ids_;
  std::unordered_map<std::string, int> terminal_ids_;
  std::vector<Production> productions_;
  std::vector<std::vector<int>> by_lhs_;
  int start_ = -1;
};

// Collects rules by name; symbol kinds are inferred on build(): a name is a
// nonterminal iff it occurs on some left-hand side.
class GrammarBuilder {
 public:
  struct Options {
    bool merge_duplicates = true;  // sum probabilities of identical rules
    bool allow_unnormalized = false;  // accept probabilities > 1
  };

  GrammarBuilder() = default;
  explicit GrammarBuilder(Options options) : options_(options) {}
  static GrammarBuilder from(const Grammar& g);

  GrammarBuilder& add(std::string lhs, std::vector<std::string> rhs, double prob, int line = 0);
  GrammarBuilder& set_start(std::string name);
  // Forces a name to be a terminal even if never used on a right-hand side.
  GrammarBuilder& declare_terminal(std::string name);

  Grammar build(std::vector<std::string>* warnings = nullptr) const;

 private:
  struct RawRule {
    std::string lhs;
    std::vector<std::string> rhs;
    double prob;
    int line;
  };
  Options options_;
  std::vector<RawRule> rules_;
  std::vector<std::string> extra_terminals_;
  std::optional<std::string> start_;
};

struct LoadOptions {
  bool merge_duplicates = true;
  bool allow_unnormalized = false;
  bool strict = false;  // improper grammars become errors instead of warnings
};

// Parses the line-oriented grammar file format:
//   LHS -> sym sym ... [prob]     # comment
//   %start NAME
Grammar parse_grammar(std::string_view text, const LoadOptions& options = {},
                      std::vector<std::string>* warnings = nullptr);
Grammar load_grammar_file(const std::string& path, const LoadOptions& options = {},
                          std::vector<std::string>* warnings = nullptr);

// Inverse of parse_grammar; probabilities are written in shortest round-trip form.
std::string to_text(const Grammar& g);

std::string format_production(const Grammar& g, const Production& p);

struct GrammarDiagnostics {
  struct ImproperLhs {
    int nonterminal;
    double sum;
  };
  std::vector<ImproperLhs> improper_lhs;
  std::vector<int> useless;  // sorted nonterminal ids
  bool null_start = false;
  double left_corner_radius = 0.0;
  double unit_radius = 0.0;
  double consistency_estimate = 0.0;  // max of the two radii

  bool proper() const { return improper_lhs.empty(); }
};

GrammarDiagnostics validate(const Grammar& g);

// Divides each rule probability by its LHS total.
Grammar renormalize(const Grammar& g);

// Removes null productions, preserving P(x) for all x != eps. A fresh start
// symbol with a single null rule is introduced when the start is nullable.
Grammar eliminate_null(const Grammar& g);

// Nonterminals that can derive some non-empty terminal string.
std::vector<bool> derives_nonempty(const Grammar& g);

// Rough spectral radius of a nonnegative square matrix given densely.
double spectral_radius_estimate(const std::vector<std::vector<double>>& m, int iterations = 400);

}  // namespace scfg
