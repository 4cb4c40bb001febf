#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace dsdh {

// Dense row-major matrix of doubles.
//
// Item-indexed quantities (features X, labels Y, outputs H, codes B) are
// stored with one item per column, so an item is column i of a K x N matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  // Matrix::from_rows({{1, 2}, {3, 4}})
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);
  // Single column from a vector.
  static Matrix column_vector(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double> col(std::size_t c) const;
  void set_col(std::size_t c, std::span<const double> values);

  // Columns [indices...] gathered into a new matrix, in the given order.
  Matrix gather_cols(std::span<const std::size_t> indices) const;

  Matrix transpose() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  bool operator==(const Matrix& other) const = default;

  std::string shape_string() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);

// a * b
Matrix matmul(const Matrix& a, const Matrix& b);
// a^T * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// a * b^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);

double frobenius_sq(const Matrix& a);
double frobenius(const Matrix& a);
double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);
bool all_finite(const Matrix& a);

// Solves a * x = b for symmetric positive definite a via Cholesky.
// Throws NumericalError naming the pivot index if a is not numerically SPD.
Matrix solve_spd(const Matrix& a, const Matrix& b);

// Logistic function, stable for any finite x.
double sigmoid(double x);

// log(1 + e^x) without overflow.
double log1p_exp(double x);

// Sign with sgn(0) = +1.
inline double sgn(double x) { return x >= 0.0 ? 1.0 : -1.0; }

// Elementwise sgn.
Matrix sign_of(const Matrix& a);

}  // namespace dsdh
