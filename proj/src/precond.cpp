#include "ksr/precond.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

namespace ksr {

Vector lower_solve(const LowerTriangular& L, std::span<const double> b) {
  if (b.size() != L.n) throw std::invalid_argument("lower_solve: size");
  Vector y(L.n);
  for (std::size_t i = 0; i < L.n; ++i) {
    double s = b[i];
    const std::size_t end = L.row_offsets[i + 1];
    for (std::size_t p = L.row_offsets[i]; p + 1 < end; ++p)
      s -= L.values[p] * y[L.col_indices[p]];
    y[i] = s / L.values[end - 1];
  }
  return y;
}

Vector lower_transpose_solve(const LowerTriangular& L,
                             std::span<const double> b) {
  if (b.size() != L.n) throw std::invalid_argument("lower_transpose_solve: size");
  Vector y(b.begin(), b.end());
  for (std::size_t i = L.n; i-- > 0;) {
    const std::size_t end = L.row_offsets[i + 1];
    y[i] /= L.values[end - 1];
    const double yi = y[i];
    for (std::size_t p = L.row_offsets[i]; p + 1 < end; ++p)
      y[L.col_indices[p]] -= L.values[p] * yi;
  }
  return y;
}

namespace {

std::vector<std::vector<std::size_t>> adjacency(const SparseSymMatrix& K) {
  std::vector<std::vector<std::size_t>> adj(K.n());
  const auto& ro = K.row_offsets();
  const auto& ci = K.col_indices();
  for (std::size_t i = 0; i < K.n(); ++i)
    for (std::size_t p = ro[i]; p < ro[i + 1]; ++p)
      if (ci[p] != i) adj[i].push_back(ci[p]);
  return adj;
}

// Cuthill-McKee order of one component; neighbors by ascending (degree, id).
std::vector<std::size_t> cm_component(
    const std::vector<std::vector<std::size_t>>& adj, std::size_t root,
    std::vector<char>& visited) {
  std::vector<std::size_t> order{root};
  visited[root] = 1;
  for (std::size_t head = 0; head < order.size(); ++head) {
    std::vector<std::size_t> next;
    for (std::size_t nb : adj[order[head]])
      if (!visited[nb]) {
        visited[nb] = 1;
        next.push_back(nb);
      }
    std::sort(next.begin(), next.end(), [&](std::size_t a, std::size_t b) {
      if (adj[a].size() != adj[b].size()) return adj[a].size() < adj[b].size();
      return a < b;
    });
    order.insert(order.end(), next.begin(), next.end());
  }
  return order;
}

// BFS level structure rooted at r; returns (eccentricity, last level).
std::pair<int, std::vector<std::size_t>> level_structure(
    const std::vector<std::vector<std::size_t>>& adj, std::size_t r) {
  std::vector<int> level(adj.size(), -1);
  std::vector<std::size_t> frontier{r}, last;
  level[r] = 0;
  int depth = 0;
  while (!frontier.empty()) {
    last = frontier;
    std::vector<std::size_t> next;
    for (std::size_t v : frontier)
      for (std::size_t nb : adj[v])
        if (level[nb] < 0) {
          level[nb] = depth + 1;
          next.push_back(nb);
        }
    if (!next.empty()) ++depth;
    frontier = std::move(next);
  }
  return {depth, last};
}

std::size_t pseudo_peripheral(const std::vector<std::vector<std::size_t>>& adj,
                              std::size_t start) {
  std::size_t root = start;
  auto [ecc, last] = level_structure(adj, root);
  for (int iter = 0; iter < 10; ++iter) {
    std::sort(last.begin(), last.end(), [&](std::size_t a, std::size_t b) {
      if (adj[a].size() != adj[b].size()) return adj[a].size() < adj[b].size();
      return a < b;
    });
    const std::size_t cand = last.front();
    auto [ecc2, last2] = level_structure(adj, cand);
    if (ecc2 <= ecc) break;
    root = cand;
    ecc = ecc2;
    last = std::move(last2);
  }
  return root;
}

}  // namespace

std::vector<std::size_t> rcm(const SparseSymMatrix& K) {
  const auto adj = adjacency(K);
  std::vector<char> visited(K.n(), 0);
  std::vector<std::size_t> order;
  order.reserve(K.n());
  for (std::size_t seed = 0; seed < K.n(); ++seed) {
    if (visited[seed]) continue;
    // Lowest-degree node of this component (ties by id), then a
    // pseudo-peripheral refinement.
    std::vector<std::size_t> comp{seed};
    {
      std::vector<char> seen(K.n(), 0);
      std::vector<std::size_t> stack{seed};
      seen[seed] = 1;
      while (!stack.empty()) {
        const std::size_t v = stack.back();
        stack.pop_back();
        for (std::size_t nb : adj[v])
          if (!seen[nb]) {
            seen[nb] = 1;
            comp.push_back(nb);
            stack.push_back(nb);
          }
      }
    }
    std::size_t start = seed;
    for (std::size_t v : comp)
      if (adj[v].size() < adj[start].size() ||
          (adj[v].size() == adj[start].size() && v < start))
        start = v;
    const std::size_t root = pseudo_peripheral(adj, start);
    const auto comp_order = cm_component(adj, root, visited);
    order.insert(order.end(), comp_order.begin(), comp_order.end());
  }
  std::reverse(order.begin(), order.end());

  const std::size_t before = bandwidth(K);
  const std::size_t after = bandwidth(permute(K, order));
  if (after > before) {
    std::iota(order.begin(), order.end(), std::size_t{0});
  }
  return order;
}

namespace {

// Row-oriented incomplete Cholesky.  `pattern_only` restricts fill to the
// lower triangle of K (IC0); otherwise entries below droptol * row norm of K
// are dropped before scaling (ICT).
bool try_factor(const SparseSymMatrix& K, double shift, bool pattern_only,
                double droptol, LowerTriangular& out) {
  const std::size_t n = K.n();
  const auto& ro = K.row_offsets();
  const auto& ci = K.col_indices();
  const auto& vv = K.values();

  std::vector<double> row_norm(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = ro[i]; p < ro[i + 1]; ++p)
      row_norm[i] += vv[p] * vv[p];
  for (auto& r : row_norm) r = std::sqrt(r);

  out.n = n;
  out.row_offsets.assign(1, 0);
  out.col_indices.clear();
  out.values.clear();

  // Column lists of finalized entries (row, value), rows ascending; they feed
  // the w[r] -= l_ij * L[r][j] updates of later rows.
  std::vector<std::vector<std::pair<std::size_t, double>>> col_entries(n);
  std::vector<double> w(n, 0.0);
  std::vector<char> touched(n, 0), in_pattern(n, 0);
  std::vector<double> diag(n, 0.0);

  for (std::size_t i = 0; i < n; ++i) {
    std::set<std::size_t> active;
    double wdiag = shift;
    for (std::size_t p = ro[i]; p < ro[i + 1]; ++p) {
      const std::size_t j = ci[p];
      if (j > i) continue;
      if (j == i) {
        wdiag += vv[p];
        continue;
      }
      w[j] = vv[p];
      touched[j] = 1;
      active.insert(j);
      if (pattern_only) in_pattern[j] = 1;
    }

    std::vector<std::pair<std::size_t, double>> row;
    while (!active.empty()) {
      const std::size_t j = *active.begin();
      active.erase(active.begin());
      const double wj = w[j];
      w[j] = 0.0;
      touched[j] = 0;
      const bool keep = pattern_only
                            ? in_pattern[j] != 0
                            : std::abs(wj) >= droptol * row_norm[i];
      if (!keep) continue;
      const double lij = wj / diag[j];
      row.emplace_back(j, lij);
      wdiag -= lij * lij;
      for (const auto& [r, v] : col_entries[j]) {
        // r > j and r < i by construction of the column lists.
        if (pattern_only && !in_pattern[r]) continue;
        if (!touched[r]) {
          touched[r] = 1;
          w[r] = 0.0;
          active.insert(r);
        }
        w[r] -= lij * v;
      }
    }

    if (pattern_only)
      for (std::size_t p = ro[i]; p < ro[i + 1]; ++p)
        if (ci[p] < i) in_pattern[ci[p]] = 0;
    if (!(wdiag > 0.0)) return false;
    const double lii = std::sqrt(wdiag);
    diag[i] = lii;
    for (const auto& [j, lij] : row) col_entries[j].emplace_back(i, lij);
    for (const auto& [j, lij] : row) {
      out.col_indices.push_back(j);
      out.values.push_back(lij);
    }
    out.col_indices.push_back(i);
    out.values.push_back(lii);
    out.row_offsets.push_back(out.col_indices.size());
  }
  return true;
}

ICFactor factor_with_retries(const SparseSymMatrix& K, bool pattern_only,
                             double droptol, ICKind kind) {
  double mean_diag = 0.0;
  for (std::size_t i = 0; i < K.n(); ++i) mean_diag += K.entry(i, i);
  mean_diag /= std::max<std::size_t>(K.n(), 1);

  ICFactor f;
  f.kind = kind;
  f.droptol = droptol;
  double shift = 0.0;
  for (int attempt = 0; attempt <= 20; ++attempt) {
    if (try_factor(K, shift, pattern_only, droptol, f.L)) {
      f.shift = shift;
      return f;
    }
    shift = (shift == 0.0) ? 1e-3 * std::abs(mean_diag) : 2.0 * shift;
    if (shift == 0.0) shift = 1e-8;
  }
  throw std::runtime_error("incomplete Cholesky breakdown persists after 20 shift retries");
}

}  // namespace

ICFactor ic0(const SparseSymMatrix& K) {
  return factor_with_retries(K, true, 0.0, ICKind::IC0);
}

ICFactor ict(const SparseSymMatrix& K, double droptol) {
  if (droptol < 0.0) throw std::invalid_argument("droptol must be >= 0");
  return factor_with_retries(K, false, droptol, ICKind::ICT);
}

double PrecondOperator::flops_per_apply() const {
  double f = 2.0 * static_cast<double>(K->nnz());
  if (factor) f += 4.0 * static_cast<double>(factor->L.nnz());
  return f;
}

Vector precond_apply(const PrecondOperator& op, std::span<const double> x) {
  ++op.applies;
  if (!op.factor) return spmv(*op.K, x);
  const Vector w = lower_transpose_solve(op.factor->L, x);
  const Vector z = spmv(*op.K, w);
  return lower_solve(op.factor->L, z);
}

}  // namespace ksr
