#ifndef SCALWEIGHT_MATRIX_HPP
#define SCALWEIGHT_MATRIX_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace scalweight {

// Dense row-major matrix of doubles. Just enough linear algebra for small
// MLP training; no views, no expression templates.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  bool operator==(const Matrix&) const = default;
};

// out = a * b^T where a is (n x k) and b is (m x k); out is (n x m).
// This matches the layer convention y = x * W^T with W stored (out x in).
Matrix matmul_bt(const Matrix& a, const Matrix& b);

// out = a^T * b where a is (k x n) and b is (k x m); out is (n x m).
Matrix matmul_at(const Matrix& a, const Matrix& b);

// out = a * b, plain product; a is (n x k), b is (k x m).
Matrix matmul(const Matrix& a, const Matrix& b);

void add_row_inplace(Matrix& m, std::span<const double> v);  // broadcast add

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);  // Euclidean norm
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void scale_inplace(std::span<double> x, double alpha);

}  // namespace scalweight

#endif
