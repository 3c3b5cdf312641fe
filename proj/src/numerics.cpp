#include "aad/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "aad/error.hpp"

namespace aad {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid input";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Size: return "size error";
    case ErrorKind::Index: return "index error";
    case ErrorKind::InsufficientData: return "insufficient data";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Label: return "label error";
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Precondition: return "precondition violated";
    case ErrorKind::OracleFailure: return "oracle failure";
    case ErrorKind::StaleCache: return "stale cache";
    case ErrorKind::Io: return "io error";
  }
  return "error";
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorKind::Shape, "matrix data length " + std::to_string(data_.size()) +
                                      " does not match " + std::to_string(rows_) + "x" +
                                      std::to_string(cols_));
  }
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() == 0 ? 0 : rows.begin()->size()) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw Error(ErrorKind::Shape, "ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

bool DenseMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

DenseMatrix DenseMatrix::transposed() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

namespace {

void require_same_inner(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw Error(ErrorKind::Shape, std::string(op) + ": inner dimensions " + std::to_string(a) +
                                      " and " + std::to_string(b) + " differ");
  }
}

}  // namespace

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_inner(a.cols(), b.rows(), "matmul");
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_inner(a.rows(), b.rows(), "matmul_tn");
  DenseMatrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto a_row = a.row(k);
    auto b_row = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a_row[i];
      if (aki == 0.0) continue;
      auto out_row = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aki * b_row[j];
    }
  }
  return out;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_inner(a.cols(), b.cols(), "matmul_nt");
  DenseMatrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(a.row(i), b.row(j));
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double frobenius_norm(const DenseMatrix& m) { return norm2(m.data()); }

DenseMatrix softmax_rows(const DenseMatrix& logits) {
  if (!logits.all_finite()) throw Error(ErrorKind::InvalidInput, "softmax_rows: non-finite logit");
  DenseMatrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto o = out.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - mx);
      z += o[c];
    }
    for (double& v : o) v /= z;
  }
  return out;
}

DenseMatrix softmax_backward(const DenseMatrix& probs, const DenseMatrix& grad_probs) {
  if (probs.rows() != grad_probs.rows() || probs.cols() != grad_probs.cols()) {
    throw Error(ErrorKind::Shape, "softmax_backward: gradient shape does not match probabilities");
  }
  DenseMatrix out(probs.rows(), probs.cols());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    auto p = probs.row(r);
    auto g = grad_probs.row(r);
    const double inner = dot(p, g);
    auto o = out.row(r);
    for (std::size_t c = 0; c < p.size(); ++c) o[c] = p[c] * (g[c] - inner);
  }
  return out;
}

bool on_simplex(std::span<const double> p, double tol) {
  if (p.empty()) return false;
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol;
}

void require_simplex_rows(const DenseMatrix& m, const char* what) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (!on_simplex(m.row(r))) {
      throw Error(ErrorKind::InvalidInput,
                  std::string(what) + ": row " + std::to_string(r) + " is not on the simplex");
    }
  }
}

double entropy(std::span<const double> p) {
  if (!on_simplex(p)) throw Error(ErrorKind::InvalidInput, "entropy: input is not on the simplex");
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return std::max(h, 0.0);
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] > v[best]) best = k;
  return best;
}

DenseMatrix l2_normalize_rows(const DenseMatrix& m) {
  DenseMatrix out = m;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double n = norm2(row);
    if (n > 0.0)
      for (double& v : row) v /= n;
  }
  return out;
}

std::vector<double> finite_diff_grad(const ScalarFunction& f, std::span<const double> x, double h) {
  if (!(h > 0.0)) throw Error(ErrorKind::Config, "finite_diff_grad: step must be positive");
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double saved = probe[k];
    probe[k] = saved + h;
    const double up = f(probe);
    probe[k] = saved - h;
    const double down = f(probe);
    probe[k] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw Error(ErrorKind::OracleFailure,
                  "finite_diff_grad: non-finite value at coordinate " + std::to_string(k));
    }
    grad[k] = (up - down) / (2.0 * h);
  }
  return grad;
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                          double floor) {
  if (analytic.size() != numeric.size())
    throw Error(ErrorKind::Shape, "max_relative_error: length mismatch");
  double worst = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    const double denom = std::max({std::abs(analytic[k]), std::abs(numeric[k]), floor});
    worst = std::max(worst, std::abs(analytic[k] - numeric[k]) / denom);
  }
  return worst;
}

namespace {

// Hestenes one-sided Jacobi for a tall matrix (rows >= cols).
ThinSvd jacobi_svd_tall(const DenseMatrix& m) {
  const std::size_t rows = m.rows();
  const std::size_t cols = m.cols();
  // Work column-major so rotations touch contiguous memory.
  std::vector<std::vector<double>> a(cols, std::vector<double>(rows));
  std::vector<std::vector<double>> v(cols, std::vector<double>(cols, 0.0));
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t r = 0; r < rows; ++r) a[c][r] = m(r, c);
    v[c][c] = 1.0;
  }

  constexpr double eps = 1e-15;
  constexpr int max_sweeps = 80;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < cols; ++p) {
      for (std::size_t q = p + 1; q < cols; ++q) {
        const double alpha = dot(a[p], a[p]);
        const double beta = dot(a[q], a[q]);
        const double gamma = dot(a[p], a[q]);
        if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t r = 0; r < rows; ++r) {
          const double ap = a[p][r];
          a[p][r] = c * ap - s * a[q][r];
          a[q][r] = s * ap + c * a[q][r];
        }
        for (std::size_t r = 0; r < cols; ++r) {
          const double vp = v[p][r];
          v[p][r] = c * vp - s * v[q][r];
          v[q][r] = s * vp + c * v[q][r];
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(cols);
  for (std::size_t c = 0; c < cols; ++c) sigma[c] = norm2(a[c]);
  std::vector<std::size_t> order(cols);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  ThinSvd out{DenseMatrix(rows, cols), std::vector<double>(cols), DenseMatrix(cols, cols)};
  for (std::size_t k = 0; k < cols; ++k) {
    const std::size_t src = order[k];
    out.values[k] = sigma[src];
    // Columns with zero singular value stay zero in U.
    if (sigma[src] > 0.0)
      for (std::size_t r = 0; r < rows; ++r) out.u(r, k) = a[src][r] / sigma[src];
    for (std::size_t r = 0; r < cols; ++r) out.v(r, k) = v[src][r];
  }
  return out;
}

}  // namespace

ThinSvd thin_svd(const DenseMatrix& m) {
  if (m.rows() > kMaxSvdDim || m.cols() > kMaxSvdDim) {
    throw Error(ErrorKind::Size, "thin_svd: " + std::to_string(m.rows()) + "x" +
                                     std::to_string(m.cols()) + " exceeds limit " +
                                     std::to_string(kMaxSvdDim));
  }
  if (!m.all_finite()) throw Error(ErrorKind::InvalidInput, "thin_svd: non-finite entry");
  if (m.rows() >= m.cols()) return jacobi_svd_tall(m);
  ThinSvd t = jacobi_svd_tall(m.transposed());
  return ThinSvd{std::move(t.v), std::move(t.values), std::move(t.u)};
}

std::vector<double> singular_values(const DenseMatrix& m) { return thin_svd(m).values; }

}  // namespace aad
