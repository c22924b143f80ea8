#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace evbs {

// Dense row-major matrix. Small and boring on purpose: the largest matrix
// in this library is the n x n influence matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::vector<double> column(std::size_t c) const;

  std::span<const double> data() const noexcept { return data_; }

  Matrix transpose() const;
  double max_abs() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
std::vector<double> operator*(const Matrix& a, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double norm_inf(std::span<const double> a);

// Square, finite, symmetric to 1e-12 relative. Construction validates.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(Matrix m);

  // Averages m with its transpose first; for finite-difference Hessians.
  static SymMatrix symmetrized(const Matrix& m);

  std::size_t order() const noexcept { return m_.rows(); }
  const Matrix& matrix() const noexcept { return m_; }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  double trace() const;

 private:
  Matrix m_;
};

struct EigenDecomposition {
  std::vector<double> values;  // descending by absolute value
  Matrix vectors;              // orthonormal columns, matching values
  int sweeps = 0;
};

// Cyclic Jacobi. Each eigenvector is signed so that its largest-magnitude
// coordinate is positive.
EigenDecomposition sym_eigen(const SymMatrix& m, int max_sweeps = 100);

// Cholesky solve for a symmetric positive definite system. A pivot below
// 1e-12 times the largest diagonal entry raises PivotError.
Matrix solve_spd(const SymMatrix& m, const Matrix& rhs);
std::vector<double> solve_spd(const SymMatrix& m, std::span<const double> rhs);
Matrix inverse_spd(const SymMatrix& m);

// Householder QR least squares. Throws on rank deficiency.
std::vector<double> least_squares(const Matrix& x, std::span<const double> y);
std::size_t numerical_rank(const Matrix& x, double rel_tol = 1e-10);

}  // namespace evbs
