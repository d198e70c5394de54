#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "scfg/grammar.hpp"

namespace scfg {

// Location of a state: chart set id plus index inside that set.
struct StateRef {
  int set = -1;
  int index = -1;

  bool valid() const { return set >= 0; }
  friend bool operator==(const StateRef&, const StateRef&) = default;
};

enum class StateKind : std::uint8_t {
  Rule,      // k X -> lambda . mu
  Start,     // k -> . S   (target holds S)
  Seed,      // k -> . X   robust-mode seed (target holds X)
  Wildcard,  // k -> lambda . ?
};

struct StateKey {
  StateKind kind = StateKind::Rule;
  int target = -1;  // production id for Rule, nonterminal for Start/Seed, unused for Wildcard
  int dot = 0;
  int start = 0;
  std::vector<int> seen;  // Wildcard: nonterminals left of the dot

  friend bool operator==(const StateKey&, const StateKey&) = default;
};

struct StateKeyHash {
  size_t operator()(const StateKey& k) const noexcept;
};

// How the current Viterbi value of a state was obtained.
struct ViterbiLink {
  enum class Kind : std::uint8_t {
    Initial,   // predicted, seeded or initial state: no children yet
    Scan,      // pred = state before the dot moved over a terminal
    Shift,     // pred = same state with dot - 1; the skipped nonterminal derives eps
    Complete,  // pred = waiting state, child = complete state for the symbol
    Copy,      // pred = identical state in another set (bracketed inputs)
  };
  Kind kind = Kind::Initial;
  StateRef pred;
  StateRef child;
};

struct EarleyState {
  StateKey key;
  double alpha = 0.0;
  double gamma = 0.0;
  // Part of gamma not already covered by unit-production closure; only this
  // part feeds further completions.
  double gamma_nonunit = 0.0;
  double viterbi = 0.0;
  ViterbiLink link;
  bool nonunit = false;  // received some gamma_nonunit contribution
  bool scanned = false;
  bool pruned = false;
};

// Accumulate-on-insert container of states for one input position.
class StateSet {
 public:
  struct Delta {
    double alpha = 0.0;
    double gamma = 0.0;
    double gamma_nonunit = 0.0;
    double viterbi = 0.0;
    ViterbiLink link;
  };
  struct InsertResult {
    int index;
    bool was_new;
  };

  StateSet() = default;
  explicit StateSet(int position) : position_(position) {}

  int position() const { return position_; }
  int size() const { return static_cast<int>(states_.size()); }
  bool empty() const { return states_.empty(); }
  const EarleyState& operator[](int i) const { return states_[i]; }
  EarleyState& operator[](int i) { return states_[i]; }
  const std::vector<EarleyState>& states() const { return states_; }

  std::optional<int> find(const StateKey& key) const;

  // Adds alpha/gamma; viterbi is max-updated and the link replaced only on
  // strict improvement.
  InsertResult insert_or_accumulate(const StateKey& key, const Delta& d);
  // Returns true if v strictly improved the state's Viterbi value.
  bool relax_viterbi(int index, double v, const ViterbiLink& link);

  void mark_scanned(int index, double alpha);
  double scanned_alpha_sum() const { return scanned_alpha_sum_; }

  bool predicted = false;
  bool finalized = false;
  // After finalize(): states waiting for each nonterminal, and wildcard states.
  std::unordered_map<int, std::vector<int>> waiting;
  std::vector<int> wildcards;

 private:
  int position_ = 0;
  std::vector<EarleyState> states_;
  std::unordered_map<StateKey, int, StateKeyHash> index_;
  double scanned_alpha_sum_ = 0.0;
};

// Complete states awaiting use in completion: served highest start index
// first, FIFO within one start index.
class CompletionQueue {
 public:
  void push(int start, StateRef ref) { buckets_[start].push_back(ref); }
  bool empty() const { return buckets_.empty(); }
  std::optional<StateRef> pop();

  template <class Visit>
  void drain(Visit&& visit) {
    while (auto r = pop()) visit(*r);
  }

 private:
  std::map<int, std::deque<StateRef>> buckets_;
};

// All state sets of a parse. Bracketed inputs create extra sets for the
// nested parser instances, so set ids are not positions; see positions.
class Chart {
 public:
  int add_set(int position) {
    sets.emplace_back(position);
    return static_cast<int>(sets.size()) - 1;
  }
  const EarleyState& state(StateRef r) const { return sets[r.set][r.index]; }
  EarleyState& state(StateRef r) { return sets[r.set][r.index]; }

  std::vector<StateSet> sets;
  std::vector<int> positions;  // top-level set id per input position 0..l
  std::vector<std::string> input;
};

// Symbol right of the dot, if any. Wildcard states report no symbol.
std::optional<Symbol> next_symbol(const Grammar& g, const StateKey& key);
bool is_complete(const Grammar& g, const StateKey& key);
// LHS nonterminal of a rule state, -1 for dummy states.
int lhs_of(const Grammar& g, const StateKey& key);

std::string format_state(const Grammar& g, const EarleyState& s, int position);
// Chart dump mirroring the classic state-set table layout.
std::string dump_chart(const Grammar& g, const Chart& chart);

}  // namespace scfg
