#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace aad {

// Row-major dense matrix of doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  bool all_finite() const;
  DenseMatrix transposed() const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// A · B
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
// Aᵀ · B
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
// A · Bᵀ
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
double frobenius_norm(const DenseMatrix& m);

// Numerically stable softmax per row (max subtraction). Throws InvalidInput on
// non-finite logits.
DenseMatrix softmax_rows(const DenseMatrix& logits);

// Pulls a gradient w.r.t. softmax outputs back to the logits:
// dL/dz_c = p_c (dL/dp_c - Σ_k p_k dL/dp_k), row by row.
DenseMatrix softmax_backward(const DenseMatrix& probs, const DenseMatrix& grad_probs);

inline constexpr double kSimplexTolerance = 1e-9;

bool on_simplex(std::span<const double> p, double tol = kSimplexTolerance);
// Throws InvalidInput naming `what` if any row of m is off the simplex.
void require_simplex_rows(const DenseMatrix& m, const char* what);

// Shannon entropy in nats with 0·ln 0 := 0. Throws InvalidInput off the simplex.
double entropy(std::span<const double> p);

// Index of the largest entry; ties go to the lower index.
std::size_t argmax(std::span<const double> v);

// Rows scaled to unit Euclidean norm; zero rows are returned unchanged.
DenseMatrix l2_normalize_rows(const DenseMatrix& m);

using ScalarFunction = std::function<double(std::span<const double>)>;

// Central differences (f(x + h e_k) - f(x - h e_k)) / 2h for every coordinate.
// Throws OracleFailure if f returns a non-finite value.
std::vector<double> finite_diff_grad(const ScalarFunction& f, std::span<const double> x,
                                     double h = 1e-5);

// Largest per-coordinate |a - n| / max(|a|, |n|, floor).
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                          double floor = 1e-8);

inline constexpr std::size_t kMaxSvdDim = 512;

struct ThinSvd {
  DenseMatrix u;                // m x r, orthonormal columns
  std::vector<double> values;   // r singular values, descending
  DenseMatrix v;                // n x r, orthonormal columns
};

// One-sided Jacobi SVD, r = min(m, n). Throws Size when either dimension
// exceeds kMaxSvdDim.
ThinSvd thin_svd(const DenseMatrix& m);
std::vector<double> singular_values(const DenseMatrix& m);

}  // namespace aad
