#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "scfg/grammar.hpp"

namespace scfg {

inline constexpr double kEpsilonTolerance = 1e-15;
inline constexpr long kEpsilonIterationCap = 1'000'000;
inline constexpr double kInverseResidualTolerance = 1e-9;
inline constexpr double kPivotTolerance = 1e-12;

class ClosureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpsilonProbs {
  std::vector<double> e;  // P(X =>* eps), indexed by nonterminal
  long iterations = 0;
  double residual = 0.0;
  bool converged = true;

  bool nullable(int x) const { return e[x] > 0.0; }
};

// Square nonnegative matrix over nonterminals, stored as sorted sparse rows.
class NonterminalMatrix {
 public:
  using Entry = std::pair<int, double>;

  NonterminalMatrix() = default;
  explicit NonterminalMatrix(int dim) : rows_(dim) {}
  static NonterminalMatrix identity(int dim);
  static NonterminalMatrix from_dense(const std::vector<std::vector<double>>& d);

  int dim() const { return static_cast<int>(rows_.size()); }
  double at(int row, int col) const;
  void add(int row, int col, double v);
  std::span<const Entry> row(int r) const { return rows_.at(r); }
  bool row_empty(int r) const { return rows_.at(r).empty(); }
  std::vector<std::vector<double>> to_dense() const;
  // Transposed copy: row c lists (r, m(r, c)).
  NonterminalMatrix transposed() const;

 private:
  std::vector<std::vector<Entry>> rows_;
};

// Boolean nonterminal x terminal relation.
class LeftCornerTerminalMatrix {
 public:
  LeftCornerTerminalMatrix() = default;
  LeftCornerTerminalMatrix(int rows, int cols) : cols_(cols), bits_(rows * cols, 0) {}
  bool at(int nt, int term) const { return bits_[nt * cols_ + term] != 0; }
  void set(int nt, int term) { bits_[nt * cols_ + term] = 1; }
  int rows() const { return cols_ == 0 ? 0 : static_cast<int>(bits_.size()) / cols_; }
  int cols() const { return cols_; }

 private:
  int cols_ = 0;
  std::vector<unsigned char> bits_;
};

using EpsilonObserver = std::function<void(std::span<const double>)>;

EpsilonProbs epsilon_probs(const Grammar& g, const EpsilonObserver& on_iterate = {});
NonterminalMatrix left_corner_matrix(const Grammar& g, const EpsilonProbs& eps);
NonterminalMatrix unit_matrix(const Grammar& g, const EpsilonProbs& eps);

// R = (I - m)^{-1}, inverting only the block of rows that have entries and
// forming R = I + R' * m.
NonterminalMatrix closure(const NonterminalMatrix& m);

LeftCornerTerminalMatrix terminal_left_corners(const Grammar& g, const EpsilonProbs& eps);
LeftCornerTerminalMatrix extended_left_corner(const Grammar& g, const NonterminalMatrix& rl,
                                              const EpsilonProbs& eps);

// Highest-probability eps derivation per nonterminal (max-product analogue
// of EpsilonProbs), used for Viterbi parses over nullable symbols.
struct BestEpsilon {
  std::vector<double> prob;
  std::vector<int> rule;  // -1 when not nullable
};
BestEpsilon best_epsilon(const Grammar& g);

struct ClosureTables {
  EpsilonProbs eps;
  BestEpsilon best_eps;
  NonterminalMatrix pl, rl, pu, ru;
  NonterminalMatrix ru_by_column;  // ru transposed: row Y lists (Z, R_U(Z, Y))
  LeftCornerTerminalMatrix rlt;
  std::vector<std::string> warnings;
};

ClosureTables build_closure_tables(const Grammar& g);

// Text dump of e, P_L, R_L, P_U, R_U.
std::string dump_tables(const Grammar& g, const ClosureTables& t);

}  // namespace scfg
