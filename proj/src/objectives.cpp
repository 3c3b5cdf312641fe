#include "aad/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "aad/error.hpp"

namespace aad {

namespace {

// Keeps log() finite at exact zeros; the matching terms are multiplied by 0.
double safe_log(double v) { return std::log(std::max(v, std::numeric_limits<double>::min())); }

void require_neighbor_blocks(const DenseMatrix& batch, std::span<const DenseMatrix> neighbors,
                             const char* what) {
  if (neighbors.size() != batch.rows()) {
    throw Error(ErrorKind::Shape, std::string(what) + ": expected one neighbor block per batch row");
  }
  for (const auto& block : neighbors) {
    if (block.rows() > 0 && block.cols() != batch.cols())
      throw Error(ErrorKind::Shape, std::string(what) + ": neighbor block width differs from C");
    require_simplex_rows(block, what);
  }
}

std::vector<double> column_mean(const DenseMatrix& m) {
  std::vector<double> mean(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) mean[c] += m(r, c);
  for (double& v : mean) v /= static_cast<double>(m.rows());
  return mean;
}

std::vector<double> column_sum(const DenseMatrix& m) {
  std::vector<double> s(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) s[c] += m(r, c);
  return s;
}

struct AnchorDots {
  std::vector<double> dots;  // p_iᵀp_k for every row k
  double sum_close = 0.0;
  double sum_background = 0.0;
};

AnchorDots anchor_dots(std::size_t anchor, const DenseMatrix& all_preds,
                       std::span<const std::size_t> close, std::span<const std::size_t> background,
                       const char* what) {
  const std::size_t n = all_preds.rows();
  if (n < 2) throw Error(ErrorKind::Size, std::string(what) + ": need at least 2 predictions");
  if (anchor >= n) throw Error(ErrorKind::Index, std::string(what) + ": anchor out of range");
  require_simplex_rows(all_preds, what);
  AnchorDots out;
  out.dots.resize(n);
  for (std::size_t k = 0; k < n; ++k) out.dots[k] = dot(all_preds.row(anchor), all_preds.row(k));
  for (std::size_t j : close) {
    if (j >= n) throw Error(ErrorKind::Index, std::string(what) + ": close index out of range");
    if (j == anchor) throw Error(ErrorKind::Precondition, std::string(what) + ": anchor inside its close set");
    out.sum_close += out.dots[j];
  }
  for (std::size_t m : background) {
    if (m >= n) throw Error(ErrorKind::Index, std::string(what) + ": background index out of range");
    out.sum_background += out.dots[m];
  }
  return out;
}

}  // namespace

double lambda_schedule(std::size_t iter, std::size_t max_iter, double beta) {
  if (!(beta >= 0.0)) throw Error(ErrorKind::Config, "lambda_schedule: beta must be non-negative");
  if (max_iter == 0) throw Error(ErrorKind::Config, "lambda_schedule: max_iter must be at least 1");
  if (iter > max_iter) throw Error(ErrorKind::Config, "lambda_schedule: iter exceeds max_iter");
  if (beta == 0.0) return 1.0;
  const double progress = static_cast<double>(iter) / static_cast<double>(max_iter);
  return std::pow(1.0 + 10.0 * progress, -beta);
}

LossResult aad_loss(const DenseMatrix& batch_preds, std::span<const DenseMatrix> neighbor_preds,
                    double lambda) {
  const std::size_t bs = batch_preds.rows();
  if (bs < 2) throw Error(ErrorKind::Size, "aad_loss: batch needs at least 2 rows");
  if (!(lambda >= 0.0)) throw Error(ErrorKind::Config, "aad_loss: lambda must be non-negative");
  require_simplex_rows(batch_preds, "aad_loss");
  require_neighbor_blocks(batch_preds, neighbor_preds, "aad_loss");

  const std::size_t classes = batch_preds.cols();
  const double inv_bs = 1.0 / static_cast<double>(bs);
  const std::vector<double> total = column_sum(batch_preds);

  LossResult out{0.0, DenseMatrix(bs, classes), 0.0, 0.0};
  double attract = 0.0;
  double disperse = 0.0;
  for (std::size_t i = 0; i < bs; ++i) {
    auto p = batch_preds.row(i);
    auto g = out.grad.row(i);
    const auto& block = neighbor_preds[i];
    for (std::size_t j = 0; j < block.rows(); ++j) {
      auto n = block.row(j);
      attract -= dot(p, n);
      for (std::size_t c = 0; c < classes; ++c) g[c] -= inv_bs * n[c];
    }
    // Σ_{m != i} p_iᵀp_m = p_iᵀ(total - p_i). p_i appears as anchor in its own
    // term and as background in every other anchor's term, hence the factor 2.
    double background = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double others = total[c] - p[c];
      background += p[c] * others;
      g[c] += 2.0 * lambda * inv_bs * others;
    }
    disperse += lambda * background;
  }
  out.discriminability = attract * inv_bs;
  out.diversity = disperse * inv_bs;
  out.value = out.discriminability + out.diversity;
  return out;
}

double exact_aad_nll(std::size_t anchor, const DenseMatrix& all_preds, std::span<const std::size_t> close,
                     std::span<const std::size_t> background) {
  const AnchorDots d = anchor_dots(anchor, all_preds, close, background, "exact_aad_nll");
  const double mx = *std::max_element(d.dots.begin(), d.dots.end());
  double z = 0.0;
  for (double v : d.dots) z += std::exp(v - mx);
  const double log_partition = mx + std::log(z);
  const double n_close = static_cast<double>(close.size());
  const double n_background = static_cast<double>(background.size());
  return -(d.sum_close - n_close * log_partition) + (d.sum_background - n_background * log_partition);
}

double jensen_upper_bound(std::size_t anchor, const DenseMatrix& all_preds,
                          std::span<const std::size_t> close, std::span<const std::size_t> background) {
  if (close.size() >= background.size()) {
    throw Error(ErrorKind::Precondition, "jensen_upper_bound: needs |close| < |background|");
  }
  const AnchorDots d = anchor_dots(anchor, all_preds, close, background, "jensen_upper_bound");
  const double n = static_cast<double>(all_preds.rows());
  double mean = 0.0;
  for (double v : d.dots) mean += v;
  mean /= n;
  const double size_gap = static_cast<double>(close.size()) - static_cast<double>(background.size());
  return -d.sum_close + d.sum_background + size_gap * (mean + std::log(n));
}

double minibatch_bound_estimate(std::size_t anchor, const DenseMatrix& all_preds,
                                std::span<const std::size_t> close,
                                std::span<const std::size_t> background) {
  if (close.size() >= background.size()) {
    throw Error(ErrorKind::Precondition, "minibatch_bound_estimate: needs |close| < |background|");
  }
  const AnchorDots d = anchor_dots(anchor, all_preds, close, background, "minibatch_bound_estimate");
  const double n_close = static_cast<double>(close.size());
  const double n_background = static_cast<double>(background.size());
  return -d.sum_close + (n_close / n_background) * d.sum_background +
         (n_close - n_background) * std::log(static_cast<double>(all_preds.rows()));
}

LossResult mi_loss(const DenseMatrix& batch_preds) {
  const std::size_t bs = batch_preds.rows();
  if (bs == 0) throw Error(ErrorKind::Size, "mi_loss: empty batch");
  require_simplex_rows(batch_preds, "mi_loss");
  const double inv_bs = 1.0 / static_cast<double>(bs);
  const std::vector<double> mean = column_mean(batch_preds);

  LossResult out{0.0, DenseMatrix(bs, batch_preds.cols()), 0.0, 0.0};
  double conditional = 0.0;
  for (std::size_t i = 0; i < bs; ++i) {
    auto p = batch_preds.row(i);
    auto g = out.grad.row(i);
    conditional += entropy(p);
    // d/dp_ic [H(Y|X) - H(Y)] = (ln p̄_c - ln p_ic) / bs; the +1 terms cancel.
    for (std::size_t c = 0; c < p.size(); ++c) g[c] = inv_bs * (safe_log(mean[c]) - safe_log(p[c]));
  }
  out.discriminability = conditional * inv_bs;
  out.diversity = -entropy(mean);
  out.value = out.discriminability + out.diversity;
  return out;
}

LossResult bnm_loss(const DenseMatrix& batch_preds, BnmVariant variant) {
  if (batch_preds.rows() == 0) throw Error(ErrorKind::Size, "bnm_loss: empty batch");
  require_simplex_rows(batch_preds, "bnm_loss");
  const double fro = frobenius_norm(batch_preds);
  LossResult out{0.0, DenseMatrix(batch_preds.rows(), batch_preds.cols()), -fro, 0.0};

  if (variant == BnmVariant::FNorm) {
    for (std::size_t k = 0; k < out.grad.size(); ++k) out.grad.data()[k] = -batch_preds.data()[k] / fro;
    out.value = -fro;
    return out;
  }

  const ThinSvd svd = thin_svd(batch_preds);
  double nuclear = 0.0;
  for (double s : svd.values) nuclear += s;
  // U has zero columns for zero singular values, which keeps -U Vᵀ a valid
  // subgradient in the rank-deficient case.
  const DenseMatrix uvt = matmul_nt(svd.u, svd.v);
  for (std::size_t k = 0; k < out.grad.size(); ++k) out.grad.data()[k] = -uvt.data()[k];
  out.value = -nuclear;
  // ||P||_* >= ||P||_F; the excess is what rank (diversity) adds.
  out.diversity = -(nuclear - fro);
  return out;
}

LossResult nc_loss(const DenseMatrix& batch_preds, std::span<const DenseMatrix> neighbor_preds,
                   std::span<const std::vector<double>> weights, NcMode mode, bool include_kl) {
  const std::size_t bs = batch_preds.rows();
  if (bs == 0) throw Error(ErrorKind::Size, "nc_loss: empty batch");
  require_simplex_rows(batch_preds, "nc_loss");
  require_neighbor_blocks(batch_preds, neighbor_preds, "nc_loss");
  if (weights.size() != bs) throw Error(ErrorKind::Shape, "nc_loss: expected one weight row per batch row");

  const std::size_t classes = batch_preds.cols();
  const double inv_bs = 1.0 / static_cast<double>(bs);
  LossResult out{0.0, DenseMatrix(bs, classes), 0.0, 0.0};

  double clustering = 0.0;
  for (std::size_t i = 0; i < bs; ++i) {
    const auto& block = neighbor_preds[i];
    if (weights[i].size() != block.rows())
      throw Error(ErrorKind::Shape, "nc_loss: weight count differs from neighbor count");
    auto p = batch_preds.row(i);
    auto g = out.grad.row(i);
    for (std::size_t j = 0; j < block.rows(); ++j) {
      const double w = weights[i][j];
      if (!(w > 0.0)) throw Error(ErrorKind::InvalidInput, "nc_loss: weights must be positive");
      auto n = block.row(j);
      const double arg = w * dot(p, n);
      double slope = w;
      if (mode == NcMode::Log) {
        if (!(arg > 0.0)) throw Error(ErrorKind::Domain, "nc_loss: log of a non-positive similarity");
        clustering -= std::log(arg);
        slope = w / arg;
      } else {
        clustering -= arg;
      }
      for (std::size_t c = 0; c < classes; ++c) g[c] -= inv_bs * slope * n[c];
    }
  }
  out.discriminability = clustering * inv_bs;

  if (include_kl) {
    const std::vector<double> mean = column_mean(batch_preds);
    const double log_c = std::log(static_cast<double>(classes));
    double kl = 0.0;
    for (std::size_t c = 0; c < classes; ++c)
      if (mean[c] > 0.0) kl += mean[c] * (std::log(mean[c]) + log_c);
    out.diversity = kl;
    for (std::size_t i = 0; i < bs; ++i)
      for (std::size_t c = 0; c < classes; ++c)
        out.grad(i, c) += inv_bs * (safe_log(mean[c]) + log_c + 1.0);
  }
  out.value = out.discriminability + out.diversity;
  return out;
}

LossResult infonce_loss(const DenseMatrix& anchors, const DenseMatrix& positives, const DenseMatrix& negatives,
                        double tau) {
  if (!(tau > 0.0)) throw Error(ErrorKind::Config, "infonce_loss: temperature must be positive");
  const std::size_t n = anchors.rows();
  const std::size_t d = anchors.cols();
  if (n == 0) throw Error(ErrorKind::Size, "infonce_loss: no anchors");
  if (positives.rows() != n || positives.cols() != d)
    throw Error(ErrorKind::Shape, "infonce_loss: positives must be row-aligned with anchors");
  if (negatives.rows() > 0 && negatives.cols() != d)
    throw Error(ErrorKind::Shape, "infonce_loss: negative feature width differs");

  const double inv_n = 1.0 / static_cast<double>(n);
  const double inv_tau = 1.0 / tau;
  LossResult out{0.0, DenseMatrix(n, d), 0.0, 0.0};
  std::vector<double> logits(negatives.rows() + 1);
  for (std::size_t a = 0; a < n; ++a) {
    auto x = anchors.row(a);
    auto y = positives.row(a);
    auto g = out.grad.row(a);
    out.discriminability -= dot(x, y) * inv_tau;
    for (std::size_t c = 0; c < d; ++c) g[c] -= inv_n * inv_tau * y[c];

    logits[0] = inv_tau;  // the e^{1/τ} floor
    for (std::size_t k = 0; k < negatives.rows(); ++k) logits[k + 1] = dot(negatives.row(k), x) * inv_tau;
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    out.diversity += mx + std::log(z);
    for (std::size_t k = 0; k < negatives.rows(); ++k) {
      const double w = std::exp(logits[k + 1] - mx) / z;
      auto neg = negatives.row(k);
      for (std::size_t c = 0; c < d; ++c) g[c] += inv_n * inv_tau * w * neg[c];
    }
  }
  out.discriminability *= inv_n;
  out.diversity *= inv_n;
  out.value = out.discriminability + out.diversity;
  return out;
}

LossResult cross_entropy_loss(const DenseMatrix& batch_preds, std::span<const int> labels) {
  const std::size_t bs = batch_preds.rows();
  if (bs == 0) throw Error(ErrorKind::Size, "cross_entropy_loss: empty batch");
  if (labels.size() != bs) throw Error(ErrorKind::Shape, "cross_entropy_loss: one label per row required");
  require_simplex_rows(batch_preds, "cross_entropy_loss");
  const double inv_bs = 1.0 / static_cast<double>(bs);
  LossResult out{0.0, DenseMatrix(bs, batch_preds.cols()), 0.0, 0.0};
  for (std::size_t i = 0; i < bs; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= batch_preds.cols()) {
      throw Error(ErrorKind::Label, "cross_entropy_loss: label " + std::to_string(y) + " out of range");
    }
    const double p = batch_preds(i, static_cast<std::size_t>(y));
    if (p > kCrossEntropyClamp) {
      out.value -= std::log(p) * inv_bs;
      out.grad(i, static_cast<std::size_t>(y)) = -inv_bs / p;
    } else {
      out.value -= std::log(kCrossEntropyClamp) * inv_bs;
    }
  }
  out.discriminability = out.value;
  return out;
}

}  // namespace aad
