#include "riskmap/sparse_inverse.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace riskmap {

namespace {

// Z(a, b) for a >= b, both in the filled pattern (strict lower entries are
// stored per column with sorted row indices).
double lookup(const std::vector<std::vector<int>>& rows,
              const std::vector<std::vector<double>>& zval,
              const std::vector<double>& zdiag, int a, int b) {
  if (a == b) return zdiag[a];
  const auto& r = rows[b];
  auto it = std::lower_bound(r.begin(), r.end(), a);
  if (it == r.end() || *it != a)
    throw std::logic_error("selected inverse: entry outside factor pattern");
  return zval[b][static_cast<std::size_t>(it - r.begin())];
}

}  // namespace

Eigen::VectorXd marginal_variances(
    const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>& solver) {
  const Eigen::SparseMatrix<double> L = solver.matrixL();
  const Eigen::VectorXd d = solver.vectorD();
  const int n = static_cast<int>(L.rows());

  // Strictly-lower factor pattern, column compressed. The unit diagonal is
  // implicit; stored zeros are kept because the recursion relies on the
  // symbolic pattern being closed under elimination fill.
  std::vector<std::vector<int>> rows(n);
  std::vector<std::vector<double>> lval(n), zval(n);
  for (int c = 0; c < n; ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(L, c); it; ++it) {
      if (it.row() <= c) continue;
      rows[c].push_back(static_cast<int>(it.row()));
      lval[c].push_back(it.value());
    }
    zval[c].assign(rows[c].size(), 0.0);
  }

  std::vector<double> zdiag(n, 0.0);
  for (int i = n - 1; i >= 0; --i) {
    const auto& r = rows[i];
    const auto& lv = lval[i];
    const int m = static_cast<int>(r.size());
    for (int idx = m - 1; idx >= 0; --idx) {
      const int j = r[idx];
      double s = 0.0;
      for (int t = 0; t < m; ++t) {
        const int k = r[t];
        s += lv[t] * lookup(rows, zval, zdiag, std::max(j, k), std::min(j, k));
      }
      zval[i][idx] = -s;
    }
    double s = 0.0;
    for (int t = 0; t < m; ++t) s += lv[t] * zval[i][t];
    zdiag[i] = 1.0 / d[i] - s;
  }

  // Map the permuted-space diagonal back to the original ordering: original
  // coordinate i lives at permuted position p(i).
  const auto& p = solver.permutationP().indices();
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) out[i] = zdiag[p[i]];
  return out;
}

}  // namespace riskmap
