#include "scfg/closures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace scfg {

NonterminalMatrix NonterminalMatrix::identity(int dim) {
  NonterminalMatrix m(dim);
  for (int i = 0; i < dim; ++i) m.add(i, i, 1.0);
  return m;
}

NonterminalMatrix NonterminalMatrix::from_dense(const std::vector<std::vector<double>>& d) {
  NonterminalMatrix m(static_cast<int>(d.size()));
  for (size_t i = 0; i < d.size(); ++i)
    for (size_t j = 0; j < d[i].size(); ++j)
      if (d[i][j] != 0.0) m.add(static_cast<int>(i), static_cast<int>(j), d[i][j]);
  return m;
}

double NonterminalMatrix::at(int row, int col) const {
  const auto& r = rows_.at(row);
  auto it = std::lower_bound(r.begin(), r.end(), col,
                             [](const Entry& e, int c) { return e.first < c; });
  return it != r.end() && it->first == col ? it->second : 0.0;
}

void NonterminalMatrix::add(int row, int col, double v) {
  auto& r = rows_.at(row);
  auto it = std::lower_bound(r.begin(), r.end(), col,
                             [](const Entry& e, int c) { return e.first < c; });
  if (it != r.end() && it->first == col)
    it->second += v;
  else
    r.insert(it, {col, v});
}

std::vector<std::vector<double>> NonterminalMatrix::to_dense() const {
  std::vector<std::vector<double>> d(dim(), std::vector<double>(dim(), 0.0));
  for (int i = 0; i < dim(); ++i)
    for (auto [j, v] : rows_[i]) d[i][j] = v;
  return d;
}

NonterminalMatrix NonterminalMatrix::transposed() const {
  NonterminalMatrix t(dim());
  for (int i = 0; i < dim(); ++i)
    for (auto [j, v] : rows_[i]) t.rows_[j].push_back({i, v});
  return t;
}

EpsilonProbs epsilon_probs(const Grammar& g, const EpsilonObserver& on_iterate) {
  int n = g.nonterminal_count();
  EpsilonProbs out;
  out.e.assign(n, 0.0);
  std::vector<int> candidates;  // rules whose RHS is all nonterminals
  for (int id = 0; id < g.production_count(); ++id) {
    const auto& p = g.production(id);
    if (p.is_null()) out.e[p.lhs] += p.prob;
    if (std::all_of(p.rhs.begin(), p.rhs.end(), [](Symbol s) { return s.is_nonterminal(); }))
      candidates.push_back(id);
  }
  if (on_iterate) on_iterate(out.e);
  std::vector<double> next(n);
  for (long it = 1; it <= kEpsilonIterationCap; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int id : candidates) {
      const auto& p = g.production(id);
      double term = p.prob;
      for (auto s : p.rhs) term *= out.e[s.id];
      next[p.lhs] += term;
    }
    double change = 0.0;
    for (int x = 0; x < n; ++x) change = std::max(change, std::abs(next[x] - out.e[x]));
    out.e.swap(next);
    out.iterations = it;
    out.residual = change;
    if (on_iterate) on_iterate(out.e);
    if (change <= kEpsilonTolerance) return out;
  }
  out.converged = false;
  return out;
}

NonterminalMatrix left_corner_matrix(const Grammar& g, const EpsilonProbs& eps) {
  NonterminalMatrix m(g.nonterminal_count());
  for (const auto& p : g.productions()) {
    double w = p.prob;
    for (auto s : p.rhs) {
      if (s.is_terminal()) break;
      m.add(p.lhs, s.id, w);
      if (!eps.nullable(s.id)) break;
      w *= eps.e[s.id];
    }
  }
  return m;
}

NonterminalMatrix unit_matrix(const Grammar& g, const EpsilonProbs& eps) {
  NonterminalMatrix m(g.nonterminal_count());
  for (const auto& p : g.productions()) {
    if (p.rhs.empty() ||
        !std::all_of(p.rhs.begin(), p.rhs.end(), [](Symbol s) { return s.is_nonterminal(); }))
      continue;
    for (size_t i = 0; i < p.rhs.size(); ++i) {
      double w = p.prob;
      bool ok = true;
      for (size_t k = 0; k < p.rhs.size() && ok; ++k) {
        if (k == i) continue;
        if (!eps.nullable(p.rhs[k].id)) ok = false;
        w *= eps.e[p.rhs[k].id];
      }
      if (ok) m.add(p.lhs, p.rhs[i].id, w);
    }
  }
  return m;
}

NonterminalMatrix closure(const NonterminalMatrix& m) {
  const int n = m.dim();
  std::vector<int> active;
  std::vector<int> local(n, -1);
  for (int i = 0; i < n; ++i)
    if (!m.row_empty(i)) {
      local[i] = static_cast<int>(active.size());
      active.push_back(i);
    }
  const int k = static_cast<int>(active.size());

  // Gauss-Jordan on [I' - P' | I'] with partial pivoting.
  std::vector<std::vector<double>> a(k, std::vector<double>(2 * k, 0.0));
  for (int r = 0; r < k; ++r) {
    a[r][r] = 1.0;
    a[r][k + r] = 1.0;
    for (auto [c, v] : m.row(active[r]))
      if (local[c] >= 0) a[r][local[c]] -= v;
  }
  for (int col = 0; col < k; ++col) {
    int piv = col;
    for (int r = col + 1; r < k; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (std::abs(a[piv][col]) < kPivotTolerance)
      throw ClosureError("singular closure matrix: grammar likely divergent");
    std::swap(a[piv], a[col]);
    double inv = 1.0 / a[col][col];
    for (double& x : a[col]) x *= inv;
    for (int r = 0; r < k; ++r) {
      if (r == col || a[r][col] == 0.0) continue;
      double f = a[r][col];
      for (int c = col; c < 2 * k; ++c) a[r][c] -= f * a[col][c];
    }
  }

  NonterminalMatrix out(n);
  for (int i = 0; i < n; ++i) {
    if (local[i] < 0) {
      out.add(i, i, 1.0);
      continue;
    }
    std::vector<double> row(n, 0.0);
    row[i] = 1.0;
    const auto& rinv = a[local[i]];
    for (int b = 0; b < k; ++b) {
      double rb = rinv[k + b];
      if (rb == 0.0) continue;
      for (auto [c, v] : m.row(active[b])) row[c] += rb * v;
    }
    for (int c = 0; c < n; ++c) {
      if (row[c] < -kPivotTolerance)
        throw ClosureError("negative closure entry: grammar likely divergent");
      if (row[c] > 0.0) out.add(i, c, row[c]);
    }
  }

  // Residual of (I - m) * R - I.
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    std::vector<double> row(n, 0.0);
    for (auto [c, v] : out.row(i)) row[c] += v;
    for (auto [b, mv] : m.row(i))
      for (auto [c, v] : out.row(b)) row[c] -= mv * v;
    row[i] -= 1.0;
    for (double x : row) worst = std::max(worst, std::abs(x));
  }
  if (worst > kInverseResidualTolerance)
    throw ClosureError("closure residual " + std::to_string(worst) + " exceeds tolerance");
  return out;
}

LeftCornerTerminalMatrix terminal_left_corners(const Grammar& g, const EpsilonProbs& eps) {
  LeftCornerTerminalMatrix plt(g.nonterminal_count(), g.terminal_count());
  for (const auto& p : g.productions()) {
    for (auto s : p.rhs) {
      if (s.is_terminal()) {
        plt.set(p.lhs, s.id);
        break;
      }
      if (!eps.nullable(s.id)) break;
    }
  }
  return plt;
}

LeftCornerTerminalMatrix extended_left_corner(const Grammar& g, const NonterminalMatrix& rl,
                                              const EpsilonProbs& eps) {
  auto plt = terminal_left_corners(g, eps);
  LeftCornerTerminalMatrix rlt(g.nonterminal_count(), g.terminal_count());
  for (int x = 0; x < g.nonterminal_count(); ++x)
    for (auto [y, v] : rl.row(x)) {
      if (v == 0.0) continue;
      for (int a = 0; a < g.terminal_count(); ++a)
        if (plt.at(y, a)) rlt.set(x, a);
    }
  return rlt;
}

BestEpsilon best_epsilon(const Grammar& g) {
  int n = g.nonterminal_count();
  BestEpsilon out{std::vector<double>(n, 0.0), std::vector<int>(n, -1)};
  // Best eps trees never repeat a nonterminal along a path, so n + 1 rounds
  // of strict-improvement relaxation reach the fixpoint.
  for (int round = 0; round <= n + 1; ++round) {
    bool changed = false;
    for (int id = 0; id < g.production_count(); ++id) {
      const auto& p = g.production(id);
      double v = p.prob;
      for (auto s : p.rhs) v *= s.is_terminal() ? 0.0 : out.prob[s.id];
      if (v > out.prob[p.lhs]) {
        out.prob[p.lhs] = v;
        out.rule[p.lhs] = id;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return out;
}

ClosureTables build_closure_tables(const Grammar& g) {
  ClosureTables t;
  t.eps = epsilon_probs(g);
  if (!t.eps.converged)
    t.warnings.push_back("epsilon probabilities did not converge (residual " +
                         std::to_string(t.eps.residual) + ")");
  t.best_eps = best_epsilon(g);
  t.pl = left_corner_matrix(g, t.eps);
  t.rl = closure(t.pl);
  t.pu = unit_matrix(g, t.eps);
  t.ru = closure(t.pu);
  t.ru_by_column = t.ru.transposed();
  t.rlt = extended_left_corner(g, t.rl, t.eps);
  return t;
}

namespace {

void dump_matrix(std::string& out, const Grammar& g, const char* title,
                 const NonterminalMatrix& m) {
  out += title;
  out += "\n";
  char buf[64];
  for (int x = 0; x < m.dim(); ++x)
    for (auto [y, v] : m.row(x)) {
      std::snprintf(buf, sizeof buf, "%.10g", v);
      out += "  " + g.nonterminal_name(x) + " " + g.nonterminal_name(y) + " " + buf + "\n";
    }
}

}  // namespace

std::string dump_tables(const Grammar& g, const ClosureTables& t) {
  std::string out = "e\n";
  char buf[64];
  for (int x = 0; x < g.nonterminal_count(); ++x) {
    std::snprintf(buf, sizeof buf, "%.10g", t.eps.e[x]);
    out += "  " + g.nonterminal_name(x) + " " + buf + "\n";
  }
  dump_matrix(out, g, "P_L", t.pl);
  dump_matrix(out, g, "R_L", t.rl);
  dump_matrix(out, g, "P_U", t.pu);
  dump_matrix(out, g, "R_U", t.ru);
  return out;
}

}  // namespace scfg
