#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "aad/numerics.hpp"

namespace aad {

// Loss value with its gradient w.r.t. the differentiated argument (the batch
// prediction matrix, or the anchor features for InfoNCE).
//
// Every objective splits as value == discriminability + diversity: the term
// that sharpens individual predictions and the term that spreads predictions
// across classes.
struct LossResult {
  double value = 0.0;
  DenseMatrix grad;
  double discriminability = 0.0;
  double diversity = 0.0;
};

struct ScheduleParams {
  double beta = 0.0;
  std::size_t max_iter = 1;
};

// (1 + 10 iter / max_iter)^(-beta). Throws Config for beta < 0, max_iter == 0
// or iter > max_iter.
double lambda_schedule(std::size_t iter, std::size_t max_iter, double beta);
inline double lambda_schedule(std::size_t iter, const ScheduleParams& s) {
  return lambda_schedule(iter, s.max_iter, s.beta);
}

// Attraction/dispersion objective, averaged over the batch:
//   L_i = -Σ_j p_iᵀ n_ij + λ Σ_{m != i} p_iᵀ p_m
// where n_ij are rows of neighbor_preds[i] (bank snapshots, treated as
// constants). In-batch predictions receive gradient both as anchor and as
// background. A neighbor block with zero rows drops the attraction for that
// anchor.
LossResult aad_loss(const DenseMatrix& batch_preds, std::span<const DenseMatrix> neighbor_preds,
                    double lambda);

// Exact -log(P(close) / P(background)) for anchor `i`, where
// p_ij = exp(p_iᵀp_j) / Σ_k exp(p_iᵀp_k) normalizes over every row of all_preds.
// Index sets refer to rows of all_preds.
double exact_aad_nll(std::size_t anchor, const DenseMatrix& all_preds,
                     std::span<const std::size_t> close, std::span<const std::size_t> background);

// Upper bound on exact_aad_nll obtained by replacing the log-partition with
// mean_k p_iᵀp_k + log N. Requires |close| < |background| (Precondition).
double jensen_upper_bound(std::size_t anchor, const DenseMatrix& all_preds,
                          std::span<const std::size_t> close, std::span<const std::size_t> background);

// The bound after the full-data mean is estimated from the background set:
//   -Σ_C p_iᵀp_j + (|C|/|B|) Σ_B p_iᵀp_m + (|C| - |B|) log N.
// An approximation, not a bound.
double minibatch_bound_estimate(std::size_t anchor, const DenseMatrix& all_preds,
                                std::span<const std::size_t> close,
                                std::span<const std::size_t> background);

// mean_i H(p_i) - H(mean_i p_i)
LossResult mi_loss(const DenseMatrix& batch_preds);

enum class BnmVariant { FNorm, Nuclear };

// FNorm: -||P||_F. Nuclear: -||P||_* with subgradient -U Vᵀ from a thin SVD.
LossResult bnm_loss(const DenseMatrix& batch_preds, BnmVariant variant);

enum class NcMode { Identity, Log };

// Neighborhood clustering:
//   mean_i [-Σ_j g(W_ij p_iᵀ n_ij)] + Σ_c p̄_c ln(p̄_c C)
// weights[i] holds one positive weight per row of neighbor_preds[i]. When
// include_kl is false only the clustering term is evaluated.
LossResult nc_loss(const DenseMatrix& batch_preds, std::span<const DenseMatrix> neighbor_preds,
                   std::span<const std::vector<double>> weights, NcMode mode, bool include_kl = true);

// Two-term InfoNCE over L2-normalized features:
//   mean_a[-aᵀy_a / τ] + mean_a[log(e^{1/τ} + Σ_i e^{n_iᵀa / τ})]
// positives are row-aligned with anchors; negatives (possibly zero rows) are
// shared by every anchor. Gradient is w.r.t. the anchors.
LossResult infonce_loss(const DenseMatrix& anchors, const DenseMatrix& positives,
                        const DenseMatrix& negatives, double tau);

inline constexpr double kCrossEntropyClamp = 1e-12;

// -mean_i ln max(p_i[y_i], 1e-12). Composed with softmax the logit gradient
// is (P - onehot(y)) / bs.
LossResult cross_entropy_loss(const DenseMatrix& batch_preds, std::span<const int> labels);

}  // namespace aad
