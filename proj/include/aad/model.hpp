#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "aad/numerics.hpp"

namespace aad {

struct MlpDims {
  std::size_t d_in = 2;
  std::size_t h1 = 15;
  std::size_t h_feat = 15;
  std::size_t classes = 2;

  friend bool operator==(const MlpDims&, const MlpDims&) = default;
};

// One tensor per parameter. Used for weights, gradients and momentum buffers.
struct MlpParams {
  DenseMatrix w1;  // d_in x h1
  std::vector<double> b1;
  DenseMatrix w2;  // h1 x h_feat
  std::vector<double> b2;
  DenseMatrix wc;  // h_feat x classes
  std::vector<double> bc;

  static MlpParams zeros(const MlpDims& dims);

  std::size_t count() const;
  // Flat layout: w1, b1, w2, b2, wc, bc, each row-major.
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  bool all_finite() const;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

// Feature extractor f: Linear -> ReLU -> Linear, classifier g: Linear.
struct MlpModel {
  MlpDims dims;
  std::uint64_t seed = 0;
  MlpParams params;
  MlpParams velocity;

  friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

struct ForwardCache {
  DenseMatrix inputs;       // bs x d_in
  DenseMatrix hidden_pre;   // bs x h1
  DenseMatrix hidden;       // bs x h1, ReLU(hidden_pre)
  DenseMatrix features;     // bs x h_feat
  DenseMatrix logits;       // bs x classes
  DenseMatrix predictions;  // bs x classes, rows on the simplex
};

// Glorot-uniform weights from a seeded generator, zero biases and momentum.
MlpModel init_model(const MlpDims& dims, std::uint64_t seed);

ForwardCache forward(const MlpModel& model, const DenseMatrix& inputs);

// Gradients of a scalar L w.r.t. every parameter given dL/dP. ReLU'(0) = 0.
MlpParams backward(const MlpModel& model, const ForwardCache& cache, const DenseMatrix& grad_predictions);

// Same as above with the softmax already folded in (dL/dlogits supplied).
MlpParams backward_from_logits(const MlpModel& model, const ForwardCache& cache,
                               const DenseMatrix& grad_logits);

// v <- momentum * v + g; theta <- theta - lr * v.
void sgd_step(MlpModel& model, const MlpParams& grads, double lr, double momentum);

inline constexpr int kCheckpointVersion = 1;

// JSON checkpoint: format_version, dims, seed and flat row-major parameter arrays.
// Momentum buffers are not stored; a loaded model starts with zero velocity.
void save_checkpoint(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_checkpoint(const std::filesystem::path& path);

}  // namespace aad
