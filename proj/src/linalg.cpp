#include "evbs/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "evbs/error.hpp"

namespace evbs {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols()) throw Error(Errc::invalid_argument, "ragged rows");
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

std::vector<double> Matrix::column(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

double Matrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw Error(Errc::invalid_argument, "matrix product: shape mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      auto crow = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (double& v : c.row(i)) v *= s;
  return c;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(Errc::invalid_argument, "matrix sum: shape mismatch");
  Matrix c = a;
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = 0; j < c.cols(); ++j) c(i, j) += b(i, j);
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) { return a + (-1.0) * b; }

std::vector<double> operator*(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw Error(Errc::invalid_argument, "matrix-vector: shape mismatch");
  std::vector<double> y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
  return y;
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

SymMatrix::SymMatrix(Matrix m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols()) throw Error(Errc::invalid_argument, "SymMatrix: not square");
  const double scale = std::max(1.0, m_.max_abs());
  for (std::size_t i = 0; i < m_.rows(); ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      if (!std::isfinite(m_(i, j)) || !std::isfinite(m_(j, i)))
        throw Error(Errc::numeric, "SymMatrix: non-finite entry at (" + std::to_string(i) + ", " +
                                       std::to_string(j) + ")");
      if (std::abs(m_(i, j) - m_(j, i)) > 1e-12 * scale)
        throw Error(Errc::invalid_argument, "SymMatrix: not symmetric at (" + std::to_string(i) +
                                                ", " + std::to_string(j) + ")");
    }
  }
}

SymMatrix SymMatrix::symmetrized(const Matrix& m) {
  if (m.rows() != m.cols()) throw Error(Errc::invalid_argument, "SymMatrix: not square");
  Matrix s = m;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j) s(i, j) = s(j, i) = 0.5 * (m(i, j) + m(j, i));
  return SymMatrix(std::move(s));
}

double SymMatrix::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < order(); ++i) t += m_(i, i);
  return t;
}

EigenDecomposition sym_eigen(const SymMatrix& sym, int max_sweeps) {
  const std::size_t n = sym.order();
  Matrix a = sym.matrix();
  Matrix v = Matrix::identity(n);

  double fro = 0.0;
  for (double x : a.data()) fro += x * x;
  fro = std::sqrt(fro);

  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    off = std::sqrt(off);
    if (off <= 1e-15 * fro || off == 0.0) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::hypot(theta, 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double g = a(k, p);
          const double h = a(k, q);
          a(k, p) = a(p, k) = c * g - s * h;
          a(k, q) = a(q, k) = s * g + c * h;
        }
        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double g = v(k, p);
          const double h = v(k, q);
          v(k, p) = c * g - s * h;
          v(k, q) = s * g + c * h;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return std::abs(a(i, i)) > std::abs(a(j, j));
  });

  EigenDecomposition out;
  out.sweeps = sweep;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t src = order[c];
    out.values[c] = a(src, src);
    std::size_t arg = 0;
    for (std::size_t k = 1; k < n; ++k)
      if (std::abs(v(k, src)) > std::abs(v(arg, src))) arg = k;
    const double sign = v(arg, src) < 0.0 ? -1.0 : 1.0;
    for (std::size_t k = 0; k < n; ++k) out.vectors(k, c) = sign * v(k, src);
  }
  return out;
}

namespace {

Matrix cholesky(const SymMatrix& sym) {
  const std::size_t n = sym.order();
  const Matrix& m = sym.matrix();
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(m(i, i)));
  const double tol = 1e-12 * max_diag;

  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = m(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > tol))
      throw PivotError(j, "matrix is not positive definite: pivot " + std::to_string(j) + " = " +
                              std::to_string(d));
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

void cholesky_solve_inplace(const Matrix& l, std::span<double> b) {
  const std::size_t n = l.rows();
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * b[k];
    b[i] = s / l(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * b[k];
    b[i] = s / l(i, i);
  }
}

}  // namespace

Matrix solve_spd(const SymMatrix& m, const Matrix& rhs) {
  if (rhs.rows() != m.order()) throw Error(Errc::invalid_argument, "solve_spd: shape mismatch");
  const Matrix l = cholesky(m);
  Matrix out(rhs.rows(), rhs.cols());
  std::vector<double> col(rhs.rows());
  for (std::size_t c = 0; c < rhs.cols(); ++c) {
    for (std::size_t r = 0; r < rhs.rows(); ++r) col[r] = rhs(r, c);
    cholesky_solve_inplace(l, col);
    for (std::size_t r = 0; r < rhs.rows(); ++r) out(r, c) = col[r];
  }
  return out;
}

std::vector<double> solve_spd(const SymMatrix& m, std::span<const double> rhs) {
  if (rhs.size() != m.order()) throw Error(Errc::invalid_argument, "solve_spd: shape mismatch");
  const Matrix l = cholesky(m);
  std::vector<double> b(rhs.begin(), rhs.end());
  cholesky_solve_inplace(l, b);
  return b;
}

Matrix inverse_spd(const SymMatrix& m) {
  Matrix inv = solve_spd(m, Matrix::identity(m.order()));
  // Exact symmetry for downstream SymMatrix construction.
  for (std::size_t i = 0; i < inv.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j) inv(i, j) = inv(j, i) = 0.5 * (inv(i, j) + inv(j, i));
  return inv;
}

namespace {

struct Householder {
  Matrix qr;                  // R in the upper triangle, reflectors below
  std::vector<double> tau;
  std::vector<double> rdiag;
  std::vector<double> col_norm;
};

Householder householder(const Matrix& x) {
  const std::size_t n = x.rows(), p = x.cols();
  Householder h{x, std::vector<double>(p), std::vector<double>(p), std::vector<double>(p)};
  Matrix& a = h.qr;
  for (std::size_t k = 0; k < p; ++k) h.col_norm[k] = norm2(x.column(k));
  for (std::size_t k = 0; k < p && k < n; ++k) {
    double nrm = 0.0;
    for (std::size_t i = k; i < n; ++i) nrm = std::hypot(nrm, a(i, k));
    if (nrm == 0.0) {
      h.rdiag[k] = 0.0;
      continue;
    }
    if (a(k, k) < 0.0) nrm = -nrm;
    for (std::size_t i = k; i < n; ++i) a(i, k) /= nrm;
    a(k, k) += 1.0;
    for (std::size_t j = k + 1; j < p; ++j) {
      double s = 0.0;
      for (std::size_t i = k; i < n; ++i) s += a(i, k) * a(i, j);
      s = -s / a(k, k);
      for (std::size_t i = k; i < n; ++i) a(i, j) += s * a(i, k);
    }
    h.rdiag[k] = -nrm;
  }
  return h;
}

}  // namespace

std::size_t numerical_rank(const Matrix& x, double rel_tol) {
  const Householder h = householder(x);
  std::size_t rank = 0;
  for (std::size_t k = 0; k < x.cols() && k < x.rows(); ++k)
    if (std::abs(h.rdiag[k]) > rel_tol * std::max(h.col_norm[k], 1e-300)) ++rank;
  return rank;
}

std::vector<double> least_squares(const Matrix& x, std::span<const double> y) {
  const std::size_t n = x.rows(), p = x.cols();
  if (y.size() != n) throw Error(Errc::invalid_argument, "least_squares: shape mismatch");
  if (n < p) throw Error(Errc::invalid_argument, "least_squares: fewer rows than columns");
  const Householder h = householder(x);
  for (std::size_t k = 0; k < p; ++k)
    if (!(std::abs(h.rdiag[k]) > 1e-10 * std::max(h.col_norm[k], 1e-300)))
      throw Error(Errc::invalid_argument,
                  "design matrix is rank deficient at column " + std::to_string(k));
  const Matrix& a = h.qr;
  std::vector<double> b(y.begin(), y.end());
  for (std::size_t k = 0; k < p; ++k) {
    double s = 0.0;
    for (std::size_t i = k; i < n; ++i) s += a(i, k) * b[i];
    s = -s / a(k, k);
    for (std::size_t i = k; i < n; ++i) b[i] += s * a(i, k);
  }
  std::vector<double> beta(p);
  for (std::size_t k = p; k-- > 0;) {
    double s = b[k];
    for (std::size_t j = k + 1; j < p; ++j) s -= a(k, j) * beta[j];
    beta[k] = s / h.rdiag[k];
  }
  return beta;
}

}  // namespace evbs
