#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "aad/numerics.hpp"

namespace aad {

enum class BankMode { Full, Ring };

struct KnnResult {
  std::vector<std::int64_t> ids;  // sample ids, best first
  DenseMatrix predictions;        // K x C copies of the stored predictions
};

// Per-sample close set (K nearest bank entries) and background set (the rest
// of the current mini-batch), both as sample ids.
struct NeighborSet {
  std::int64_t anchor = -1;
  std::vector<std::int64_t> close;
  std::vector<std::int64_t> background;
};

// Feature/prediction store for target samples.
//
// Full mode keeps one slot per sample (slot == sample id). Ring mode appends
// at a cursor and overwrites the oldest rows once the buffer is full.
// KNN uses cosine similarity; rows with zero norm are never returned.
class MemoryBank {
 public:
  MemoryBank(BankMode mode, std::size_t capacity, std::size_t feature_dim, std::size_t classes);

  BankMode mode() const noexcept { return mode_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t feature_dim() const noexcept { return features_.cols(); }
  std::size_t classes() const noexcept { return predictions_.cols(); }
  std::size_t filled() const noexcept { return filled_; }
  std::size_t cursor() const noexcept { return cursor_; }

  const DenseMatrix& features() const noexcept { return features_; }
  const DenseMatrix& predictions() const noexcept { return predictions_; }
  const std::vector<std::int64_t>& sample_ids() const noexcept { return sample_ids_; }

  // Rows of `features` and `predictions` are aligned with `ids`.
  void update(std::span<const std::int64_t> ids, const DenseMatrix& features,
              const DenseMatrix& predictions);

  // K occupied slots with highest cosine similarity to `query`, skipping every
  // slot holding `exclude_id` (pass -1 to exclude nothing). Ties go to the
  // lower sample id. Throws InsufficientData when filled <= K or fewer than K
  // eligible slots remain.
  KnnResult knn(std::span<const double> query, std::size_t k, std::int64_t exclude_id) const;

  // One CSV row per occupied slot: id, feature values, prediction values.
  void dump_csv(const std::filesystem::path& path) const;

 private:
  BankMode mode_;
  std::size_t capacity_;
  DenseMatrix features_;
  DenseMatrix predictions_;
  std::vector<std::int64_t> sample_ids_;
  std::vector<double> norms_;
  std::size_t cursor_ = 0;
  std::size_t filled_ = 0;
};

}  // namespace aad
