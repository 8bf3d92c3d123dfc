#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <vector>

#include "ssl_lab/error.hpp"
#include "ssl_lab/matrix.hpp"

namespace ssl_lab {

struct FeatureMatrix {
  Matrix raw;
  Matrix normalized;

  static FeatureMatrix from(Matrix x) {
    FeatureMatrix f;
    f.normalized = x;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      double s = 0.0;
      for (double v : x.row(r)) s += v * v;
      require(s > 0.0 && std::isfinite(s), ErrorKind::ZeroFeatureRow, "feature row " + std::to_string(r) + " is zero");
      const double inv = 1.0 / std::sqrt(s);
      for (double& v : f.normalized.row(r)) v *= inv;
    }
    f.raw = std::move(x);
    return f;
  }

  std::size_t size() const noexcept { return raw.rows(); }
};

/// Square sparse matrix, rows sorted by column.
class SparseMatrix {
 public:
  struct Entry {
    std::size_t col;
    double value;
  };

  SparseMatrix() = default;
  explicit SparseMatrix(std::size_t n) : rows_(n) {}

  std::size_t size() const noexcept { return rows_.size(); }
  const std::vector<Entry>& row(std::size_t i) const { return rows_[i]; }
  std::vector<Entry>& row(std::size_t i) { return rows_[i]; }

  std::size_t nnz() const {
    std::size_t n = 0;
    for (const auto& r : rows_) n += r.size();
    return n;
  }

  double at(std::size_t i, std::size_t j) const {
    const auto& r = rows_[i];
    auto it = std::lower_bound(r.begin(), r.end(), j, [](const Entry& e, std::size_t c) { return e.col < c; });
    return it != r.end() && it->col == j ? it->value : 0.0;
  }

  Matrix dense() const {
    Matrix m(size(), size());
    for (std::size_t i = 0; i < size(); ++i)
      for (const auto& e : rows_[i]) m(i, e.col) = e.value;
    return m;
  }

  /// this * x for an N x C dense block.
  Matrix multiply(const Matrix& x) const {
    require(x.rows() == size(), ErrorKind::ShapeMismatch, "sparse multiply shape mismatch");
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < size(); ++i) {
      auto o = out.row(i);
      for (const auto& e : rows_[i]) {
        auto xr = x.row(e.col);
        for (std::size_t c = 0; c < x.cols(); ++c) o[c] += e.value * xr[c];
      }
    }
    return out;
  }

  bool symmetric() const {
    for (std::size_t i = 0; i < size(); ++i)
      for (const auto& e : rows_[i])
        if (at(e.col, i) != e.value) return false;
    return true;
  }

  static SparseMatrix from_dense(const Matrix& m) {
    require(m.rows() == m.cols(), ErrorKind::ShapeMismatch, "sparse matrix must be square");
    SparseMatrix s(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j)
        if (m(i, j) != 0.0) s.rows_[i].push_back({j, m(i, j)});
    return s;
  }

 private:
  std::vector<std::vector<Entry>> rows_;
};

/// Neighbors of every row by cosine, ties to the smaller index.
inline std::vector<std::vector<std::pair<std::size_t, double>>> knn_cosine(const FeatureMatrix& x, std::size_t k) {
  const std::size_t n = x.size();
  const Matrix& f = x.normalized;
  std::vector<std::vector<std::pair<std::size_t, double>>> out(n);
  std::vector<std::pair<std::size_t, double>> cand;
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    auto xi = f.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      auto xj = f.row(j);
      double d = 0.0;
      for (std::size_t c = 0; c < f.cols(); ++c) d += xi[c] * xj[c];
      cand.emplace_back(j, std::clamp(d, -1.0, 1.0));
    }
    auto better = [](const auto& a, const auto& b) { return a.second != b.second ? a.second > b.second : a.first < b.first; };
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end(), better);
    out[i].assign(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

/// a_ij = max(cos, 0)^gamma over the k nearest neighbors of i, then W = max(A, A^T).
inline SparseMatrix build_affinity(const FeatureMatrix& x, std::size_t k, double gamma) {
  const std::size_t n = x.size();
  require(k >= 1 && k < n, ErrorKind::InvalidArgument,
          "k must satisfy 1 <= k < N (k=" + std::to_string(k) + ", N=" + std::to_string(n) + ")");
  require(gamma >= 1.0, ErrorKind::InvalidArgument, "gamma must be >= 1");
  const auto nbrs = knn_cosine(x, k);
  std::vector<std::vector<SparseMatrix::Entry>> raw(n);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [j, cos] : nbrs[i]) {
      const double a = std::pow(std::max(cos, 0.0), gamma);
      raw[i].push_back({j, a});
      raw[j].push_back({i, a});
    }
  SparseMatrix w(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = raw[i];
    std::sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.col != b.col ? a.col < b.col : a.value > b.value; });
    for (const auto& e : r)
      if (w.row(i).empty() || w.row(i).back().col != e.col) w.row(i).push_back(e);  // first is the max
  }
  return w;
}

inline constexpr double kDegreeEpsilon = 1e-12;

inline SparseMatrix normalize_symmetric(const SparseMatrix& w) {
  const std::size_t n = w.size();
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (const auto& e : w.row(i)) d += e.value;
    inv_sqrt[i] = 1.0 / std::sqrt(d > 0.0 ? d : kDegreeEpsilon);
  }
  SparseMatrix s = w;
  for (std::size_t i = 0; i < n; ++i)
    for (auto& e : s.row(i)) e.value *= inv_sqrt[i] * inv_sqrt[e.col];
  return s;
}

struct PropagationOptions {
  double cg_rel_tol = 1e-6;
  std::size_t cg_max_iter = 50;
  std::size_t fixed_point_max_iter = 20000;
  double residual_tol = 1e-5;
};

struct PropagationSolve {
  Matrix F;
  std::size_t cg_iterations = 0;  // summed over columns
  std::size_t fixed_point_iterations = 0;
  bool used_fallback = false;
  double residual = 0.0;  // ||F - (alpha S F + Y)||_inf
};

/// max |F - (alpha S F + Y)|
inline double fixed_point_residual(const SparseMatrix& s, const Matrix& y, double alpha, const Matrix& f) {
  const Matrix sf = s.multiply(f);
  double worst = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i)
    worst = std::max(worst, std::abs(f.values()[i] - (alpha * sf.values()[i] + y.values()[i])));
  return worst;
}

/// Solves (I - alpha S) F = Y column by column by conjugate gradient. Columns
/// that miss the relative tolerance fall back to the fixed-point iteration
/// F <- alpha S F + Y, warm-started from the CG iterate.
inline PropagationSolve propagate(const SparseMatrix& s, const Matrix& y, double alpha, const PropagationOptions& opt = {}) {
  require(alpha > 0.0 && alpha < 1.0, ErrorKind::InvalidArgument, "alpha must lie in (0,1)");
  require(y.rows() == s.size(), ErrorKind::ShapeMismatch, "label matrix has " + shape_string(y) + " for a graph of " +
                                                               std::to_string(s.size()) + " nodes");
  const std::size_t n = s.size(), c = y.cols();
  PropagationSolve out;
  out.F = Matrix(n, c);

  auto apply = [&](const std::vector<double>& v, std::vector<double>& av) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (const auto& e : s.row(i)) acc += e.value * v[e.col];
      av[i] = v[i] - alpha * acc;
    }
  };
  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  };

  std::vector<bool> column_ok(c, true);
  std::vector<double> x(n), r(n), p(n), ap(n);
  for (std::size_t col = 0; col < c; ++col) {
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = 0.0;
      r[i] = y(i, col);
      p[i] = r[i];
    }
    const double bnorm = std::sqrt(dot(r, r));
    double rr = bnorm * bnorm;
    bool ok = bnorm == 0.0;
    for (std::size_t it = 0; !ok && it < opt.cg_max_iter; ++it) {
      apply(p, ap);
      const double pap = dot(p, ap);
      if (!(pap > 0.0)) break;
      const double step = rr / pap;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += step * p[i];
        r[i] -= step * ap[i];
      }
      const double rr_new = dot(r, r);
      ++out.cg_iterations;
      if (std::sqrt(rr_new) <= opt.cg_rel_tol * bnorm) ok = true;
      const double beta = rr_new / rr;
      rr = rr_new;
      for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    }
    for (std::size_t i = 0; i < n; ++i) out.F(i, col) = x[i];
    column_ok[col] = ok;
  }

  if (std::find(column_ok.begin(), column_ok.end(), false) != column_ok.end()) {
    out.used_fallback = true;
    Matrix& f = out.F;
    for (; out.fixed_point_iterations < opt.fixed_point_max_iter; ++out.fixed_point_iterations) {
      const Matrix sf = s.multiply(f);
      double change = 0.0;
      for (std::size_t i = 0; i < f.size(); ++i) {
        const double next = alpha * sf.values()[i] + y.values()[i];
        change = std::max(change, std::abs(next - f.values()[i]));
        f.values()[i] = next;
      }
      if (change <= opt.residual_tol * (1.0 - alpha) * 1e-2) break;
    }
  }
  out.residual = fixed_point_residual(s, y, alpha, out.F);
  require(out.residual <= opt.residual_tol && all_finite(out.F), ErrorKind::NonConvergence,
          "label propagation did not converge: residual " + std::to_string(out.residual));
  return out;
}

/// omega_i = 1 - H(f_i) / log C on the clamped, row-normalized scores.
inline std::vector<double> certainty_weights(const Matrix& f) {
  std::vector<double> w(f.rows(), 0.0);
  const double log_c = std::log(static_cast<double>(f.cols()));
  for (std::size_t r = 0; r < f.rows(); ++r) {
    double sum = 0.0;
    for (double v : f.row(r)) sum += std::max(v, 0.0);
    if (!(sum > 0.0)) continue;
    if (f.cols() < 2) {
      w[r] = 1.0;
      continue;
    }
    double h = 0.0;
    for (double v : f.row(r)) {
      const double p = std::max(v, 0.0) / sum;
      if (p > 0.0) h -= p * std::log(p);
    }
    w[r] = std::clamp(1.0 - h / log_c, 0.0, 1.0);
  }
  return w;
}

/// zeta_c = N / (C N_c)
inline std::vector<double> class_weights(const std::vector<std::size_t>& counts, std::size_t n) {
  std::vector<double> z;
  const double c = static_cast<double>(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k) {
    require(counts[k] > 0, ErrorKind::ZeroClassCount, "class " + std::to_string(k) + " has no samples");
    z.push_back(static_cast<double>(n) / (c * static_cast<double>(counts[k])));
  }
  return z;
}

struct PropagationResult {
  Matrix F;
  std::vector<std::size_t> pseudo_labels;
  std::vector<double> certainty;
  std::vector<double> class_weights;
  PropagationSolve solve;
};

/// Full transductive pass: `labels[i] < C` marks a labeled row, anything else
/// is unlabeled. Labeled rows keep their label and certainty 1. Classes with
/// no (pseudo-)labeled member get weight 1; no sample carries them anyway.
inline PropagationResult label_propagation(const FeatureMatrix& x, const std::vector<std::size_t>& labels, std::size_t num_classes,
                                           std::size_t k, double gamma, double alpha, const PropagationOptions& opt = {}) {
  const std::size_t n = x.size();
  require(labels.size() == n, ErrorKind::ShapeMismatch, "one label slot per feature row expected");
  Matrix y(n, num_classes);
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] < num_classes) y(i, labels[i]) = 1.0;
  const SparseMatrix s = normalize_symmetric(build_affinity(x, std::min(k, n - 1), gamma));
  PropagationResult out;
  out.solve = propagate(s, y, alpha, opt);
  out.F = out.solve.F;
  const auto omega = certainty_weights(out.F);
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const bool known = labels[i] < num_classes;
    out.pseudo_labels.push_back(known ? labels[i] : argmax(out.F.row(i)));
    out.certainty.push_back(known ? 1.0 : omega[i]);
    ++counts[out.pseudo_labels.back()];
  }
  for (std::size_t c = 0; c < num_classes; ++c)
    out.class_weights.push_back(counts[c] ? static_cast<double>(n) / (num_classes * static_cast<double>(counts[c])) : 1.0);
  return out;
}

/// `i<TAB>j<TAB>weight`, one line per stored entry.
inline void dump_graph_tsv(std::ostream& out, const SparseMatrix& w) {
  char buf[32];
  for (std::size_t i = 0; i < w.size(); ++i)
    for (const auto& e : w.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", e.value);
      out << i << '\t' << e.col << '\t' << buf << '\n';
    }
}

}  // namespace ssl_lab
