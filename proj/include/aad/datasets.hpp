#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "aad/numerics.hpp"

namespace aad {

enum class DomainTag { Source, Target };

inline constexpr int kUnlabeled = -1;

struct Dataset {
  DenseMatrix x;            // N x d
  std::vector<int> labels;  // one per row, kUnlabeled for unlabeled/unknown
  DomainTag domain = DomainTag::Source;
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return x.rows(); }
  std::size_t dim() const noexcept { return x.cols(); }
  bool has_labels() const;
  // Copy with every label set to kUnlabeled.
  Dataset without_labels() const;
};

struct MoonsConfig {
  std::size_t n_per_class = 300;
  double noise_sigma = 0.1;
  double rotation_deg = 0.0;
  std::uint64_t seed = 0;
};

// Class 0 at (cos t, sin t), class 1 at (1 - cos t, 0.5 - sin t), t ~ U[0, π],
// plus isotropic Gaussian noise. Rows are grouped by class. A non-zero
// rotation_deg rotates the result about its centroid and tags it Target.
Dataset make_twin_moons(const MoonsConfig& cfg);

// Rotates 2-D points about their centroid; labels kept, domain set to Target.
Dataset rotate_dataset(const Dataset& ds, double degrees);

// Appends n_unknown points of a Gaussian blob (center (0.5, -1.5), σ 0.1)
// labeled kUnlabeled.
Dataset make_open_set_variant(const Dataset& ds, std::size_t n_unknown, std::uint64_t seed);

// Header `d=<int>,labels=<0|1>`, then one comma-separated row per sample with
// the label last when present. Values are written with 17 significant digits.
void save_csv_dataset(const Dataset& ds, const std::filesystem::path& path);
// num_classes is inferred as max label + 1 (0 when nothing is labeled).
Dataset load_csv_dataset(const std::filesystem::path& path, DomainTag domain = DomainTag::Target);

}  // namespace aad
