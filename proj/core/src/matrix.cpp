#include "dal/matrix.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace dal {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("Matrix: data length " + std::to_string(data_.size()) +
                                " does not match " + std::to_string(rows_) + "x" +
                                std::to_string(cols_));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Matrix();
  Matrix m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols())
      throw std::invalid_argument("Matrix::from_rows: ragged rows");
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

bool Matrix::bitwise_equal(const Matrix& other) const {
  if (!same_shape(other)) return false;
  return std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0;
}

bool Matrix::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Matrix Matrix::row(std::size_t i) const {
  Matrix r(1, cols_);
  for (std::size_t j = 0; j < cols_; ++j) r(0, j) = (*this)(i, j);
  return r;
}

Matrix Matrix::col(std::size_t j) const {
  Matrix c(rows_, 1);
  for (std::size_t i = 0; i < rows_; ++i) c(i, 0) = (*this)(i, j);
  return c;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  if (!same_shape(other))
    throw std::invalid_argument("Matrix+=: shape mismatch " + shape_str(*this) + " vs " +
                                shape_str(other));
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  if (!same_shape(other))
    throw std::invalid_argument("Matrix-=: shape mismatch " + shape_str(*this) + " vs " +
                                shape_str(other));
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: shape mismatch " + shape_str(a) + " x " + shape_str(b));
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Matrix operator+(Matrix a, const Matrix& b) { a += b; return a; }
Matrix operator-(Matrix a, const Matrix& b) { a -= b; return a; }
Matrix operator*(Matrix a, double s) { a *= s; return a; }

Matrix hadamard(Matrix a, const Matrix& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("hadamard: shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  for (std::size_t k = 0; k < a.size(); ++k) a.at_flat(k) *= b.at_flat(k);
  return a;
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

double dot_all(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("dot_all: shape mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a.at_flat(k) * b.at_flat(k);
  return s;
}

std::string shape_str(const Matrix& a) {
  return "(" + std::to_string(a.rows()) + "," + std::to_string(a.cols()) + ")";
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace dal
