#include "scfg/parser.hpp"

#include <algorithm>
#include <numeric>

#include "parser_internal.hpp"

namespace scfg {

namespace {

// Bracket-structured input: a token or a bracketed group of items.
struct Item {
  bool bracket = false;
  int token = -1;  // terminal id, -1 when unknown to the grammar
  std::vector<Item> children;
};

int first_terminal(const Item& item) {
  if (!item.bracket) return item.token;
  return first_terminal(item.children.front());
}

std::vector<Item> build_items(const Grammar& g, std::span<const std::string> tokens,
                              std::vector<std::string>& plain) {
  std::vector<std::vector<Item>> stack(1);
  for (const auto& tok : tokens) {
    if (tok == kOpenBracket) {
      stack.emplace_back();
    } else if (tok == kCloseBracket) {
      if (stack.size() == 1) throw ParseError("unbalanced ')' in input");
      if (stack.back().empty()) throw ParseError("empty bracketed span in input");
      Item group;
      group.bracket = true;
      group.children = std::move(stack.back());
      stack.pop_back();
      stack.back().push_back(std::move(group));
    } else {
      Item item;
      item.token = g.find_terminal(tok).value_or(-1);
      stack.back().push_back(item);
      plain.push_back(tok);
    }
  }
  if (stack.size() != 1) throw ParseError("unbalanced '(' in input");
  return std::move(stack.front());
}

// Set ids visible to one parser instance, by input position. A bracketed
// child instance ignores states that start before its boundary.
struct Frame {
  int boundary = -1;
  std::vector<int> set_at;
};

struct EngineConfig {
  bool robust = false;
  bool predict_final = false;
};

class Engine {
 public:
  Engine(const Grammar& g, const ClosureTables& t, const ParseOptions& opt, EngineConfig cfg,
         ParseResult& res, int length)
      : g_(g), t_(t), opt_(opt), cfg_(cfg), res_(res), chart_(res.chart), length_(length) {}

  int init() {
    int s0 = chart_.add_set(0);
    StateKey dummy{StateKind::Start, g_.start(), 0, 0, {}};
    ViterbiLink initial;
    auto d = chart_.sets[s0].insert_or_accumulate(dummy, {1.0, 1.0, 0.0, 1.0, initial});
    const int s = g_.start();
    if (t_.eps.nullable(s)) {
      StateRef dref{s0, d.index};
      StateKey fin{StateKind::Start, s, 1, 0, {}};
      auto f = chart_.sets[s0].insert_or_accumulate(
          fin, {t_.eps.e[s], t_.eps.e[s], 0.0, t_.best_eps.prob[s],
                {ViterbiLink::Kind::Shift, dref, {}}});
      if (opt_.record_derivations) {
        TapeOp op;
        op.kind = TapeOp::Kind::Shift;
        op.target = {s0, f.index};
        op.a = dref;
        op.eps = {s};
        res_.tape.push_back(op);
      }
    }
    if (cfg_.robust)
      chart_.sets[s0].insert_or_accumulate({StateKind::Wildcard, -1, 0, 0, {}},
                                           {0.0, 1.0, 0.0, 1.0, initial});
    return s0;
  }

  // Runs one instance over items starting at f.set_at.back(). Returns the
  // final set id, or -1 when the input is rejected.
  int run(const std::vector<Item>& items, Frame& f, bool is_child) {
    int cur = f.set_at.back();
    for (size_t it = 0; it < items.size(); ++it) {
      const bool last = it + 1 == items.size();
      const Item& item = items[it];
      const int pos = chart_.sets[cur].position();
      const int exclude = last && is_child ? f.boundary : -1;
      if (cfg_.robust) seed(cur, item.token);
      predict(cur, first_terminal(item));
      finalize(cur);

      if (!item.bracket) {
        int nxt = chart_.add_set(pos + 1);
        CompletionQueue q;
        if (item.token >= 0) scan(cur, item.token, nxt, f.boundary, q);
        res_.prefix_probs.push_back(chart_.sets[nxt].scanned_alpha_sum());
        f.set_at.push_back(nxt);
        if (chart_.sets[nxt].empty() && !cfg_.robust) return -1;
        close_set(nxt, f, exclude, q);
        cur = nxt;
        continue;
      }

      Frame child{pos, f.set_at};
      int cfinal = run(item.children, child, true);
      for (size_t k = f.set_at.size(); k + 1 < child.set_at.size(); ++k)
        f.set_at.push_back(child.set_at[k]);
      if (cfinal < 0) {
        f.set_at.push_back(child.set_at.back());
        return -1;
      }
      const int q_pos = chart_.sets[cfinal].position();
      int qp = chart_.add_set(q_pos);
      CompletionQueue q;
      copy_constituents(cfinal, pos, qp, q);
      f.set_at.push_back(qp);
      if (chart_.sets[qp].empty()) return -1;
      close_set(qp, f, exclude, q);
      cur = qp;
    }
    if (!is_child && cfg_.predict_final) {
      predict(cur, -1);
      finalize(cur);
    }
    return cur;
  }

 private:
  struct Contribution {
    double alpha = 0.0;
    double gamma = 0.0;
    bool nonunit = false;
    double viterbi = 0.0;
    ViterbiLink link;
  };

  bool passes(int nt, int tok) const { return tok < 0 || !opt_.filter || t_.rlt.at(nt, tok); }

  void close_set(int sid, const Frame& f, int exclude, CompletionQueue& q) {
    complete(sid, f, exclude, q);
    if (opt_.compute_viterbi) viterbi_pass(sid, f, exclude);
    if (chart_.sets[sid].position() < length_) prune(sid);
  }

  // Inserts key and its spontaneous dot shifts over nullable symbols. op is
  // recorded once per inserted state with the accumulated eps factors.
  StateRef insert_chain(int sid, StateKey key, Contribution c, TapeOp* op, CompletionQueue* q) {
    const int pos = chart_.sets[sid].position();
    StateRef first;
    while (true) {
      auto& set = chart_.sets[sid];
      auto ins = set.insert_or_accumulate(
          key, {c.alpha, c.gamma, c.nonunit ? c.gamma : 0.0, c.viterbi, c.link});
      StateRef ref{sid, ins.index};
      if (!first.valid()) first = ref;
      auto& s = set[ins.index];
      if (c.nonunit && !s.nonunit) {
        s.nonunit = true;
        if (q && key.kind == StateKind::Rule && key.start < pos && is_complete(g_, key))
          q->push(key.start, ref);
      }
      if (op) {
        op->target = ref;
        res_.tape.push_back(*op);
      }
      auto next = next_symbol(g_, key);
      if (!next || next->is_terminal() || !t_.eps.nullable(next->id)) break;
      const int a = next->id;
      c.alpha *= t_.eps.e[a];
      c.gamma *= t_.eps.e[a];
      c.viterbi = s.viterbi * t_.best_eps.prob[a];
      c.link = {ViterbiLink::Kind::Shift, ref, {}};
      if (op) op->eps.push_back(a);
      ++key.dot;
    }
    return first;
  }

  void seed(int sid, int tok) {
    auto& set = chart_.sets[sid];
    const int pos = set.position();
    for (int x = 0; x < g_.nonterminal_count(); ++x) {
      if (!passes(x, tok)) continue;
      set.insert_or_accumulate({StateKind::Seed, x, 0, pos, {}}, {0.0, 1.0, 0.0, 1.0, {}});
    }
  }

  void predict(int sid, int tok) {
    auto& set = chart_.sets[sid];
    if (set.predicted) return;
    set.predicted = true;
    const int pos = set.position();
    const int n = g_.nonterminal_count();
    std::vector<double> zsum(n, 0.0);
    std::vector<char> zwant(n, 0);
    for (const auto& s : set.states()) {
      if (s.pruned) continue;
      const auto& k = s.key;
      if (k.kind == StateKind::Wildcard) {
        for (int z = 0; z < n; ++z)
          if (passes(z, tok)) {
            zsum[z] += s.alpha;
            zwant[z] = 1;
          }
        continue;
      }
      // States predicted here are covered by the left-corner closure.
      if (k.kind == StateKind::Rule && k.start >= pos) continue;
      auto next = next_symbol(g_, k);
      if (!next || next->is_terminal() || !passes(next->id, tok)) continue;
      zsum[next->id] += s.alpha;
      zwant[next->id] = 1;
    }
    std::vector<double> ysum(n, 0.0);
    std::vector<char> ywant(n, 0);
    for (int z = 0; z < n; ++z) {
      if (!zwant[z]) continue;
      for (auto [y, r] : t_.rl.row(z)) {
        if (!passes(y, tok)) continue;
        ysum[y] += zsum[z] * r;
        ywant[y] = 1;
      }
    }
    for (int y = 0; y < n; ++y) {
      if (!ywant[y]) continue;
      for (int id : g_.productions_of(y)) {
        const double p = g_.production(id).prob;
        TapeOp op;
        op.kind = TapeOp::Kind::Leaf;
        op.rule = id;
        insert_chain(sid, {StateKind::Rule, id, 0, pos, {}}, {ysum[y] * p, p, false, p, {}},
                     opt_.record_derivations ? &op : nullptr, nullptr);
      }
    }
  }

  void finalize(int sid) {
    auto& set = chart_.sets[sid];
    if (set.finalized) return;
    set.finalized = true;
    set.waiting.clear();
    set.wildcards.clear();
    for (int i = 0; i < set.size(); ++i) {
      const auto& s = set[i];
      if (s.pruned) continue;
      if (s.key.kind == StateKind::Wildcard) {
        set.wildcards.push_back(i);
        continue;
      }
      auto next = next_symbol(g_, s.key);
      if (next && next->is_nonterminal()) set.waiting[next->id].push_back(i);
    }
  }

  void scan(int sid, int tok, int nid, int boundary, CompletionQueue& q) {
    const int n = chart_.sets[sid].size();
    for (int i = 0; i < n; ++i) {
      const auto& s = chart_.sets[sid][i];
      if (s.pruned || s.key.start < boundary) continue;
      auto next = next_symbol(g_, s.key);
      if (!next || !next->is_terminal() || next->id != tok) continue;
      StateRef src{sid, i};
      StateKey key = s.key;
      ++key.dot;
      TapeOp op;
      op.kind = TapeOp::Kind::Scan;
      op.a = src;
      const double alpha = s.alpha;
      auto ref = insert_chain(nid, key,
                              {alpha, s.gamma, true, s.viterbi, {ViterbiLink::Kind::Scan, src, {}}},
                              opt_.record_derivations ? &op : nullptr, &q);
      chart_.sets[nid].mark_scanned(ref.index, alpha);
    }
  }

  // Pred states for a completion of a constituent starting at position j.
  bool usable_pred(const EarleyState& p, const Frame& f) const {
    if (p.key.kind == StateKind::Start) return f.boundary < 0;
    return p.key.start >= f.boundary || p.key.kind == StateKind::Wildcard;
  }

  void complete(int sid, const Frame& f, int exclude, CompletionQueue& q) {
    q.drain([&](StateRef cref) {
      const auto& c = chart_.state(cref);
      if (c.key.kind != StateKind::Rule || c.key.start == exclude) return;
      const int j = c.key.start;
      const int y = lhs_of(g_, c.key);
      const double u = c.gamma_nonunit;
      const int psid = f.set_at[j];
      const auto& pset = chart_.sets[psid];
      for (auto [z, r] : t_.ru_by_column.row(y)) {
        auto it = pset.waiting.find(z);
        if (it != pset.waiting.end()) {
          for (int pi : it->second) {
            const auto& p = pset[pi];
            if (!usable_pred(p, f)) continue;
            StateKey key = p.key;
            ++key.dot;
            const bool nonunit = !(p.key.kind == StateKind::Rule && p.key.start == j);
            TapeOp op;
            op.kind = TapeOp::Kind::Product;
            op.add_nonunit = nonunit;
            op.a = {psid, pi};
            op.b = cref;
            op.z = z;
            op.y = y;
            insert_chain(sid, std::move(key),
                         {p.alpha * u * r, p.gamma * u * r, nonunit, 0.0,
                          {ViterbiLink::Kind::Complete, {psid, pi}, cref}},
                         opt_.record_derivations ? &op : nullptr, &q);
          }
        }
        for (int wi : pset.wildcards) {
          const auto& w = pset[wi];
          StateKey key = w.key;
          key.seen.push_back(z);
          ++key.dot;
          chart_.sets[sid].insert_or_accumulate(
              key, {w.alpha * u * r, w.gamma * u * r, 0.0, 0.0,
                    {ViterbiLink::Kind::Complete, {psid, wi}, cref}});
        }
      }
    });
  }

  void relax_chain(int sid, StateKey key, double v, ViterbiLink link, CompletionQueue& w) {
    const int pos = chart_.sets[sid].position();
    while (true) {
      auto& set = chart_.sets[sid];
      int idx;
      bool improved;
      if (auto found = set.find(key)) {
        idx = *found;
        improved = set.relax_viterbi(idx, v, link);
      } else {
        idx = set.insert_or_accumulate(key, {0.0, 0.0, 0.0, v, link}).index;
        improved = v > 0.0;
      }
      if (!improved) return;
      if (key.kind == StateKind::Rule && key.start < pos && is_complete(g_, key))
        w.push(key.start, {sid, idx});
      auto next = next_symbol(g_, key);
      if (!next || next->is_terminal() || !t_.eps.nullable(next->id)) return;
      v *= t_.best_eps.prob[next->id];
      link = {ViterbiLink::Kind::Shift, {sid, idx}, {}};
      ++key.dot;
    }
  }

  // Max-product completion over the original rules (no unit closure).
  void viterbi_pass(int sid, const Frame& f, int exclude) {
    const int pos = chart_.sets[sid].position();
    CompletionQueue w;
    for (int i = 0; i < chart_.sets[sid].size(); ++i) {
      const auto& s = chart_.sets[sid][i];
      if (s.key.kind == StateKind::Rule && s.key.start < pos && is_complete(g_, s.key))
        w.push(s.key.start, {sid, i});
    }
    w.drain([&](StateRef cref) {
      const EarleyState& c = chart_.state(cref);
      if (c.key.start == exclude) return;
      const double cv = c.viterbi;
      const int j = c.key.start;
      const int y = lhs_of(g_, c.key);
      const int psid = f.set_at[j];
      const auto& pset = chart_.sets[psid];
      if (auto it = pset.waiting.find(y); it != pset.waiting.end()) {
        for (int pi : it->second) {
          const auto& p = pset[pi];
          if (!usable_pred(p, f)) continue;
          StateKey key = p.key;
          ++key.dot;
          relax_chain(sid, std::move(key), p.viterbi * cv,
                      {ViterbiLink::Kind::Complete, {psid, pi}, cref}, w);
        }
      }
      for (int wi : pset.wildcards) {
        const auto& wd = pset[wi];
        StateKey key = wd.key;
        key.seen.push_back(y);
        ++key.dot;
        relax_chain(sid, std::move(key), wd.viterbi * cv,
                    {ViterbiLink::Kind::Complete, {psid, wi}, cref}, w);
      }
    });
  }

  void copy_constituents(int from, int boundary, int to, CompletionQueue& q) {
    const int n = chart_.sets[from].size();
    for (int i = 0; i < n; ++i) {
      const auto s = chart_.sets[from][i];
      if (s.pruned || s.key.kind != StateKind::Rule || s.key.start != boundary ||
          !is_complete(g_, s.key))
        continue;
      StateRef src{from, i};
      auto ins = chart_.sets[to].insert_or_accumulate(
          s.key, {s.alpha, s.gamma, s.gamma_nonunit, s.viterbi,
                  {ViterbiLink::Kind::Copy, src, {}}});
      StateRef ref{to, ins.index};
      if (s.nonunit && !chart_.sets[to][ins.index].nonunit) {
        chart_.sets[to][ins.index].nonunit = true;
        q.push(boundary, ref);
      }
      if (opt_.record_derivations) {
        TapeOp op;
        op.kind = TapeOp::Kind::Copy;
        op.target = ref;
        op.a = src;
        res_.tape.push_back(op);
      }
    }
  }

  void prune(int sid) {
    const auto& po = opt_.prune;
    if (!po.enabled()) return;
    auto& set = chart_.sets[sid];
    std::vector<int> live;
    for (int i = 0; i < set.size(); ++i)
      if (!set[i].pruned) live.push_back(i);
    if (po.mode == PruneOptions::Mode::Beam) {
      if (static_cast<int>(live.size()) <= po.beam) return;
      std::stable_sort(live.begin(), live.end(),
                       [&](int a, int b) { return set[a].alpha > set[b].alpha; });
      for (size_t i = static_cast<size_t>(std::max(po.beam, 0)); i < live.size(); ++i)
        set[live[i]].pruned = true;
    } else {
      double top = 0.0;
      for (int i : live) top = std::max(top, set[i].alpha);
      for (int i : live)
        if (set[i].alpha < po.relative * top) set[i].pruned = true;
    }
  }

  const Grammar& g_;
  const ClosureTables& t_;
  const ParseOptions& opt_;
  EngineConfig cfg_;
  ParseResult& res_;
  Chart& chart_;
  int length_;
};

ParseResult run_parse(std::shared_ptr<const Grammar> gp, std::shared_ptr<const ClosureTables> tp,
                      std::span<const std::string> tokens, const ParseOptions& options,
                      EngineConfig cfg) {
  const Grammar& g = *gp;
  ParseResult res;
  res.grammar = gp;
  res.tables = tp;
  res.robust = cfg.robust;
  res.approximate = options.prune.enabled();
  res.has_tape = options.record_derivations;
  res.has_viterbi = options.compute_viterbi;
  res.warnings = tp->warnings;

  auto items = build_items(g, tokens, res.chart.input);
  const int length = static_cast<int>(res.chart.input.size());
  Engine engine(g, *tp, options, cfg, res, length);
  Frame top{-1, {engine.init()}};
  int final_set = engine.run(items, top, false);
  res.chart.positions = top.set_at;
  // Positions past a dead prefix have prefix probability zero.
  res.prefix_probs.resize(length, 0.0);
  if (final_set < 0) return res;

  const auto& fset = res.chart.sets[final_set];
  if (auto idx = fset.find({StateKind::Start, g.start(), 1, 0, {}})) {
    res.final_state = {final_set, *idx};
    res.sentence_prob = fset[*idx].gamma;
    res.accepted = res.sentence_prob > 0.0;
  }
  if (res.accepted && options.compute_viterbi) {
    auto [tree, v] = viterbi_parse(res);
    res.viterbi_tree = std::move(tree);
    res.viterbi_prob = v;
  }
  if (cfg.robust) res.partial_parses = detail::collect_partial_parses(res, final_set);
  return res;
}

bool has_brackets(std::span<const std::string> tokens) {
  return std::any_of(tokens.begin(), tokens.end(),
                     [](const std::string& t) { return t == kOpenBracket || t == kCloseBracket; });
}

}  // namespace

std::size_t ParseResult::state_count() const {
  std::size_t n = 0;
  for (const auto& s : chart.sets) n += s.size();
  return n;
}

std::size_t ParseResult::predicted_state_count() const {
  std::size_t n = 0;
  for (const auto& set : chart.sets)
    for (const auto& s : set.states())
      if (s.key.kind == StateKind::Rule && s.key.start == set.position()) ++n;
  return n;
}

Parser::Parser(Grammar g)
    : grammar_(std::make_shared<const Grammar>(std::move(g))),
      tables_(std::make_shared<const ClosureTables>(build_closure_tables(*grammar_))) {}

Parser::Parser(std::shared_ptr<const Grammar> g, std::shared_ptr<const ClosureTables> tables)
    : grammar_(std::move(g)), tables_(std::move(tables)) {}

ParseResult Parser::parse(std::span<const std::string> tokens, const ParseOptions& options) const {
  return run_parse(grammar_, tables_, tokens, options, {});
}

ParseResult Parser::parse_bracketed(std::span<const std::string> tokens,
                                    const ParseOptions& options) const {
  return run_parse(grammar_, tables_, tokens, options, {});
}

ParseResult Parser::parse_robust(std::span<const std::string> tokens,
                                 const ParseOptions& options) const {
  if (has_brackets(tokens)) throw ParseError("robust parsing does not accept bracketed input");
  if (options.record_derivations) throw ParseError("robust parses do not record derivations");
  std::vector<std::string> unknown;
  for (const auto& tok : tokens)
    if (!grammar_->find_terminal(tok) &&
        std::find(unknown.begin(), unknown.end(), tok) == unknown.end())
      unknown.push_back(tok);
  if (unknown.empty()) return run_parse(grammar_, tables_, tokens, options, {true, false});

  auto b = GrammarBuilder::from(*grammar_);
  for (const auto& tok : unknown) {
    std::string name = "UNK_" + tok;
    while (grammar_->find_nonterminal(name) || grammar_->find_terminal(name)) name += "_";
    b.add(name, {tok}, 1.0);
  }
  auto g = std::make_shared<const Grammar>(b.build());
  auto t = std::make_shared<const ClosureTables>(build_closure_tables(*g));
  auto res = run_parse(g, t, tokens, options, {true, false});
  for (const auto& tok : unknown)
    res.warnings.push_back("unknown token '" + tok + "' covered by a fresh preterminal");
  return res;
}

std::map<std::string, double> Parser::next_word_distribution(
    std::span<const std::string> prefix) const {
  if (has_brackets(prefix)) throw ParseError("next-word prediction does not accept brackets");
  ParseOptions opt;
  opt.compute_viterbi = false;
  auto res = run_parse(grammar_, tables_, prefix, opt, {false, true});
  const int length = static_cast<int>(res.chart.input.size());
  if (static_cast<int>(res.chart.positions.size()) != length + 1)
    throw ParseError("prefix is not a valid prefix of the language");
  const double base = length == 0 ? 1.0 : res.prefix_probs.back();
  if (!(base > 0.0)) throw ParseError("prefix has probability zero");
  std::map<std::string, double> out;
  for (const auto& s : res.chart.sets[res.chart.positions.back()].states()) {
    auto next = next_symbol(*grammar_, s.key);
    if (!next || !next->is_terminal() || s.alpha == 0.0) continue;
    out[grammar_->terminal_name(next->id)] += s.alpha / base;
  }
  return out;
}

}  // namespace scfg
