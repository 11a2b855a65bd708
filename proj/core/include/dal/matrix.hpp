#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace dal {

// Dense row-major matrix of doubles. A batch of n features of dimension d
// is stored as an n x d matrix, one sample per row.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& at_flat(std::size_t k) { return data_[k]; }
  double at_flat(std::size_t k) const { return data_[k]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool bitwise_equal(const Matrix& other) const;
  bool all_finite() const;

  Matrix row(std::size_t i) const;
  Matrix col(std::size_t j) const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix hadamard(Matrix a, const Matrix& b);
double frobenius_norm(const Matrix& a);
double dot_all(const Matrix& a, const Matrix& b);

std::string shape_str(const Matrix& a);

// Shortest round-trip decimal formatting (std::to_chars).
std::string format_double(double v);

}  // namespace dal
