#include "scfg/chart.hpp"

#include <cstdio>

namespace scfg {

size_t StateKeyHash::operator()(const StateKey& k) const noexcept {
  size_t h = static_cast<size_t>(k.kind);
  auto mix = [&h](size_t v) { h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2); };
  mix(static_cast<size_t>(k.target));
  mix(static_cast<size_t>(k.dot));
  mix(static_cast<size_t>(k.start));
  for (int s : k.seen) mix(static_cast<size_t>(s));
  return h;
}

std::optional<int> StateSet::find(const StateKey& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

StateSet::InsertResult StateSet::insert_or_accumulate(const StateKey& key, const Delta& d) {
  auto [it, inserted] = index_.emplace(key, size());
  if (inserted) {
    EarleyState s;
    s.key = key;
    s.alpha = d.alpha;
    s.gamma = d.gamma;
    s.gamma_nonunit = d.gamma_nonunit;
    s.viterbi = d.viterbi;
    s.link = d.link;
    states_.push_back(std::move(s));
    return {it->second, true};
  }
  auto& s = states_[it->second];
  s.alpha += d.alpha;
  s.gamma += d.gamma;
  s.gamma_nonunit += d.gamma_nonunit;
  if (d.viterbi > s.viterbi) {
    s.viterbi = d.viterbi;
    s.link = d.link;
  }
  return {it->second, false};
}

bool StateSet::relax_viterbi(int index, double v, const ViterbiLink& link) {
  auto& s = states_[index];
  if (!(v > s.viterbi)) return false;
  s.viterbi = v;
  s.link = link;
  return true;
}

void StateSet::mark_scanned(int index, double alpha) {
  states_[index].scanned = true;
  scanned_alpha_sum_ += alpha;
}

std::optional<StateRef> CompletionQueue::pop() {
  if (buckets_.empty()) return std::nullopt;
  auto it = std::prev(buckets_.end());
  StateRef r = it->second.front();
  it->second.pop_front();
  if (it->second.empty()) buckets_.erase(it);
  return r;
}

std::optional<Symbol> next_symbol(const Grammar& g, const StateKey& key) {
  switch (key.kind) {
    case StateKind::Rule: {
      const auto& rhs = g.production(key.target).rhs;
      if (key.dot < static_cast<int>(rhs.size())) return rhs[key.dot];
      return std::nullopt;
    }
    case StateKind::Start:
    case StateKind::Seed:
      if (key.dot == 0) return Symbol::nonterminal(key.target);
      return std::nullopt;
    case StateKind::Wildcard:
      return std::nullopt;
  }
  return std::nullopt;
}

bool is_complete(const Grammar& g, const StateKey& key) {
  switch (key.kind) {
    case StateKind::Rule:
      return key.dot == static_cast<int>(g.production(key.target).rhs.size());
    case StateKind::Start:
    case StateKind::Seed:
      return key.dot == 1;
    case StateKind::Wildcard:
      return false;
  }
  return false;
}

int lhs_of(const Grammar& g, const StateKey& key) {
  return key.kind == StateKind::Rule ? g.production(key.target).lhs : -1;
}

std::string format_state(const Grammar& g, const EarleyState& s, int position) {
  const auto& k = s.key;
  std::string out = std::to_string(position) + ": " + std::to_string(k.start) + " ";
  std::vector<std::string> rhs;
  switch (k.kind) {
    case StateKind::Rule: {
      const auto& p = g.production(k.target);
      out += g.nonterminal_name(p.lhs) + " ->";
      for (auto sym : p.rhs) rhs.push_back(g.symbol_name(sym));
      break;
    }
    case StateKind::Start:
    case StateKind::Seed:
      out += "->";
      rhs.push_back(g.nonterminal_name(k.target));
      break;
    case StateKind::Wildcard:
      out += "->";
      for (int x : k.seen) rhs.push_back(g.nonterminal_name(x));
      rhs.push_back("?");
      break;
  }
  for (size_t i = 0; i <= rhs.size(); ++i) {
    if (static_cast<int>(i) == k.dot) out += " .";
    if (i < rhs.size()) out += " " + rhs[i];
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "  alpha=%.10g gamma=%.10g v=%.10g", s.alpha, s.gamma,
                s.viterbi);
  return out + buf;
}

std::string dump_chart(const Grammar& g, const Chart& chart) {
  std::string out;
  for (const auto& set : chart.sets) {
    out += "state set " + std::to_string(set.position()) + "\n";
    for (const auto& s : set.states()) {
      if (s.pruned) continue;
      out += "  " + format_state(g, s, set.position()) + "\n";
    }
  }
  return out;
}

}  // namespace scfg
