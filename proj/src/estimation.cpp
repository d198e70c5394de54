#include "scfg/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace scfg {

namespace {

double eps_product(const std::vector<int>& eps, const EpsilonProbs& e, int skip = -1) {
  double p = 1.0;
  for (int k = 0; k < static_cast<int>(eps.size()); ++k)
    if (k != skip) p *= e.e[eps[k]];
  return p;
}

// Solves a x = b in place by Gaussian elimination with partial pivoting.
std::vector<double> solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const int n = static_cast<int>(b.size());
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (std::abs(a[piv][col]) < kPivotTolerance)
      throw EstimationError("singular epsilon Jacobian: grammar at the edge of consistency");
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (int r = col + 1; r < n; ++r) {
      double f = a[r][col] / a[col][col];
      if (f == 0.0) continue;
      for (int c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < n; ++c) s -= a[r][c] * x[c];
    x[r] = s / a[r][r];
  }
  return x;
}

// Adds the contribution of d(loss)/d(e) to the rule gradient through the
// fixpoint e = F(e, P).
void chain_epsilon(const Grammar& g, const EpsilonProbs& eps, const std::vector<double>& ge,
                   std::vector<double>& gp) {
  const int n = g.nonterminal_count();
  std::vector<int> local(n, -1), nullable;
  for (int x = 0; x < n; ++x)
    if (eps.nullable(x)) {
      local[x] = static_cast<int>(nullable.size());
      nullable.push_back(x);
    }
  const int m = static_cast<int>(nullable.size());
  if (m == 0) return;
  // a = I - J^T with J[X][Y] = dF_X / de_Y.
  std::vector<std::vector<double>> a(m, std::vector<double>(m, 0.0));
  for (int i = 0; i < m; ++i) a[i][i] = 1.0;
  std::vector<int> all_nt;
  for (int id = 0; id < g.production_count(); ++id) {
    const auto& p = g.production(id);
    bool ok = local[p.lhs] >= 0;
    for (auto s : p.rhs) ok = ok && s.is_nonterminal() && local[s.id] >= 0;
    if (!ok) continue;
    all_nt.push_back(id);
    for (size_t k = 0; k < p.rhs.size(); ++k) {
      double d = p.prob;
      for (size_t l = 0; l < p.rhs.size(); ++l)
        if (l != k) d *= eps.e[p.rhs[l].id];
      a[local[p.rhs[k].id]][local[p.lhs]] -= d;
    }
  }
  std::vector<double> b(m);
  for (int i = 0; i < m; ++i) b[i] = ge[nullable[i]];
  auto gt = solve(std::move(a), std::move(b));
  for (int id : all_nt) {
    const auto& p = g.production(id);
    double prod = 1.0;
    for (auto s : p.rhs) prod *= eps.e[s.id];
    gp[id] += gt[local[p.lhs]] * prod;
  }
}

}  // namespace

OuterAnnotations backward_pass(const ParseResult& r) {
  if (!r.has_tape) throw EstimationError("parse did not record derivations");
  if (!r.accepted || !(r.sentence_prob > 0.0)) throw EstimationError("sentence was not accepted");
  const Grammar& g = *r.grammar;
  const ClosureTables& t = *r.tables;
  const int n = g.nonterminal_count();

  OuterAnnotations out;
  out.sentence_prob = r.sentence_prob;
  for (const auto& set : r.chart.sets) {
    out.beta.emplace_back(set.size(), 0.0);
    out.beta_nonunit.emplace_back(set.size(), 0.0);
  }
  out.rule_gradient.assign(g.production_count(), 0.0);
  std::vector<double> ge(n, 0.0);
  std::vector<std::vector<double>> gr(n, std::vector<double>(n, 0.0));
  auto& gbar = out.beta;
  auto& ubar = out.beta_nonunit;
  auto gv = [&](StateRef s) { return r.chart.state(s).gamma; };
  auto uv = [&](StateRef s) { return r.chart.state(s).gamma_nonunit; };
  auto add_eps = [&](const std::vector<int>& eps, double w) {
    for (int k = 0; k < static_cast<int>(eps.size()); ++k)
      ge[eps[k]] += w * eps_product(eps, t.eps, k);
  };

  gbar[r.final_state.set][r.final_state.index] = 1.0;
  for (auto it = r.tape.rbegin(); it != r.tape.rend(); ++it) {
    const TapeOp& op = *it;
    const double tg = gbar[op.target.set][op.target.index];
    const double tu = ubar[op.target.set][op.target.index];
    const double e = eps_product(op.eps, t.eps);
    switch (op.kind) {
      case TapeOp::Kind::Leaf: {
        const double p = g.production(op.rule).prob;
        out.rule_gradient[op.rule] += tg * e;
        add_eps(op.eps, tg * p);
        break;
      }
      case TapeOp::Kind::Scan:
        gbar[op.a.set][op.a.index] += (tg + tu) * e;
        add_eps(op.eps, (tg + tu) * gv(op.a));
        break;
      case TapeOp::Kind::Shift:
        gbar[op.a.set][op.a.index] += tg * e;
        add_eps(op.eps, tg * gv(op.a));
        break;
      case TapeOp::Kind::Copy:
        gbar[op.a.set][op.a.index] += tg;
        ubar[op.a.set][op.a.index] += tu;
        break;
      case TapeOp::Kind::Product: {
        const double w = tg + (op.add_nonunit ? tu : 0.0);
        if (w == 0.0) break;
        const double ga = gv(op.a), ub = uv(op.b), rr = t.ru.at(op.z, op.y);
        gbar[op.a.set][op.a.index] += w * ub * rr * e;
        ubar[op.b.set][op.b.index] += w * ga * rr * e;
        gr[op.z][op.y] += w * ga * ub * e;
        add_eps(op.eps, w * ga * ub * rr);
        break;
      }
    }
  }

  // R_U = (I - P_U)^{-1}: dL/dP_U = R_U^T (dL/dR_U) R_U^T.
  auto ru = t.ru.to_dense();
  std::vector<std::vector<double>> tmp(n, std::vector<double>(n, 0.0)), gpu = tmp;
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k)
      if (ru[k][i] != 0.0)
        for (int j = 0; j < n; ++j) tmp[i][j] += ru[k][i] * gr[k][j];
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k)
      if (tmp[i][k] != 0.0)
        for (int j = 0; j < n; ++j) gpu[i][j] += tmp[i][k] * ru[j][k];

  // P_U(X, Y_i) = sum over rules X -> Y_1..Y_m of P(r) prod_{k != i} e_{Y_k}.
  for (int id = 0; id < g.production_count(); ++id) {
    const auto& p = g.production(id);
    if (p.rhs.empty()) continue;
    bool all_nt = true;
    for (auto s : p.rhs) all_nt = all_nt && s.is_nonterminal();
    if (!all_nt) continue;
    const int m = static_cast<int>(p.rhs.size());
    for (int i = 0; i < m; ++i) {
      const double w = gpu[p.lhs][p.rhs[i].id];
      if (w == 0.0) continue;
      double others = 1.0;
      for (int k = 0; k < m; ++k)
        if (k != i) others *= t.eps.e[p.rhs[k].id];
      out.rule_gradient[id] += w * others;
      for (int k = 0; k < m; ++k) {
        if (k == i) continue;
        double d = p.prob;
        for (int l = 0; l < m; ++l)
          if (l != i && l != k) d *= t.eps.e[p.rhs[l].id];
        ge[p.rhs[k].id] += w * d;
      }
    }
  }

  chain_epsilon(g, t.eps, ge, out.rule_gradient);
  return out;
}

ExpectedCounts& ExpectedCounts::operator+=(const ExpectedCounts& o) {
  if (counts.size() < o.counts.size()) counts.resize(o.counts.size(), 0.0);
  for (size_t i = 0; i < o.counts.size(); ++i) counts[i] += o.counts[i];
  log_likelihood += o.log_likelihood;
  sentences += o.sentences;
  skipped += o.skipped;
  warnings.insert(warnings.end(), o.warnings.begin(), o.warnings.end());
  return *this;
}

ExpectedCounts expected_counts(const ParseResult& r, const OuterAnnotations& outer) {
  const Grammar& g = *r.grammar;
  if (!(outer.sentence_prob > 0.0)) throw EstimationError("sentence probability is zero");
  ExpectedCounts c;
  c.counts.resize(g.production_count());
  for (int id = 0; id < g.production_count(); ++id)
    c.counts[id] = g.production(id).prob * outer.rule_gradient[id] / outer.sentence_prob;
  c.log_likelihood = std::log(outer.sentence_prob);
  c.sentences = 1;
  return c;
}

ExpectedCounts expected_counts(const Parser& p, std::span<const std::string> sentence) {
  ParseOptions opt;
  opt.compute_viterbi = false;
  opt.record_derivations = true;
  auto r = p.parse(sentence, opt);
  return expected_counts(r, backward_pass(r));
}

Corpus corpus_from_text(const std::string& text) {
  Corpus out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto toks = tokenize(line);
    if (!toks.empty()) out.push_back(std::move(toks));
  }
  return out;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw EstimationError("cannot open corpus file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return corpus_from_text(ss.str());
}

EmResult em_step(const Grammar& g, const Corpus& corpus, const EstimationOptions& options) {
  Parser parser(g);
  EmResult res;
  res.counts.counts.assign(g.production_count(), 0.0);
  for (size_t i = 0; i < corpus.size(); ++i) {
    ParseOptions opt;
    opt.compute_viterbi = false;
    opt.record_derivations = true;
    auto r = parser.parse(corpus[i], opt);
    if (!r.accepted) {
      std::string msg = "sentence " + std::to_string(i + 1) + " has no parse";
      if (options.strict) throw EstimationError(msg);
      res.counts.skipped++;
      res.warnings.push_back(msg + "; skipped");
      continue;
    }
    res.counts += expected_counts(r, backward_pass(r));
  }
  res.log_likelihood = res.counts.log_likelihood;

  std::vector<double> totals(g.nonterminal_count(), 0.0);
  for (int id = 0; id < g.production_count(); ++id)
    totals[g.production(id).lhs] += res.counts.counts[id];
  std::vector<double> probs(g.production_count());
  std::vector<bool> warned(g.nonterminal_count(), false);
  for (int id = 0; id < g.production_count(); ++id) {
    const int lhs = g.production(id).lhs;
    if (totals[lhs] > 0.0) {
      probs[id] = res.counts.counts[id] / totals[lhs];
    } else {
      probs[id] = g.production(id).prob;
      if (!warned[lhs]) {
        warned[lhs] = true;
        res.warnings.push_back("no expected uses of " + g.nonterminal_name(lhs) +
                               "; probabilities kept");
      }
    }
  }
  res.grammar = g.with_probabilities(probs);
  return res;
}

TrainingReport train(const Grammar& g, const Corpus& corpus, const TrainOptions& options) {
  TrainingReport rep;
  rep.grammar = g;
  EstimationOptions eo{options.strict};
  for (int it = 0; it < options.max_iters; ++it) {
    auto step = em_step(rep.grammar, corpus, eo);
    if (it == 0) rep.warnings = step.warnings;
    rep.log_likelihoods.push_back(step.log_likelihood);
    double change = 0.0;
    for (int id = 0; id < g.production_count(); ++id)
      change = std::max(change, std::abs(step.grammar.production(id).prob -
                                         rep.grammar.production(id).prob));
    rep.grammar = std::move(step.grammar);
    rep.iterations = it + 1;
    const auto& ll = rep.log_likelihoods;
    const bool ll_flat = ll.size() >= 2 && std::abs(ll.back() - ll[ll.size() - 2]) < options.tol;
    if (ll_flat || change < options.tol) {
      rep.converged = true;
      break;
    }
  }
  return rep;
}

}  // namespace scfg
