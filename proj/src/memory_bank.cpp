#include "aad/memory_bank.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <string>

#include "aad/error.hpp"

namespace aad {

MemoryBank::MemoryBank(BankMode mode, std::size_t capacity, std::size_t feature_dim, std::size_t classes)
    : mode_(mode),
      capacity_(capacity),
      features_(capacity, feature_dim),
      predictions_(capacity, classes),
      sample_ids_(capacity, -1),
      norms_(capacity, 0.0) {
  if (capacity == 0) throw Error(ErrorKind::Config, "memory bank capacity must be at least 1");
  if (feature_dim == 0 || classes == 0)
    throw Error(ErrorKind::Config, "memory bank needs non-zero feature and class dimensions");
}

void MemoryBank::update(std::span<const std::int64_t> ids, const DenseMatrix& features,
                        const DenseMatrix& predictions) {
  if (features.rows() != ids.size() || predictions.rows() != ids.size())
    throw Error(ErrorKind::Shape, "bank update: ids, features and predictions must be row-aligned");
  if (features.cols() != feature_dim() || predictions.cols() != classes())
    throw Error(ErrorKind::Shape, "bank update: row width does not match the bank");
  if (!features.all_finite()) throw Error(ErrorKind::InvalidInput, "bank update: non-finite feature");
  require_simplex_rows(predictions, "bank update");
  for (std::int64_t id : ids) {
    if (id < 0) throw Error(ErrorKind::Index, "bank update: negative sample id");
    if (mode_ == BankMode::Full && static_cast<std::size_t>(id) >= capacity_) {
      throw Error(ErrorKind::Index, "bank update: sample id " + std::to_string(id) +
                                        " outside capacity " + std::to_string(capacity_));
    }
  }

  for (std::size_t r = 0; r < ids.size(); ++r) {
    std::size_t slot;
    if (mode_ == BankMode::Full) {
      slot = static_cast<std::size_t>(ids[r]);
      if (sample_ids_[slot] < 0) ++filled_;
    } else {
      slot = cursor_;
      cursor_ = (cursor_ + 1) % capacity_;
      filled_ = std::min(filled_ + 1, capacity_);
    }
    std::copy(features.row(r).begin(), features.row(r).end(), features_.row(slot).begin());
    std::copy(predictions.row(r).begin(), predictions.row(r).end(), predictions_.row(slot).begin());
    sample_ids_[slot] = ids[r];
    norms_[slot] = norm2(features_.row(slot));
  }
}

KnnResult MemoryBank::knn(std::span<const double> query, std::size_t k, std::int64_t exclude_id) const {
  if (k == 0) throw Error(ErrorKind::Config, "knn: K must be at least 1");
  if (query.size() != feature_dim()) throw Error(ErrorKind::Shape, "knn: query width does not match the bank");
  if (filled_ <= k) {
    throw Error(ErrorKind::InsufficientData, "knn: bank holds " + std::to_string(filled_) +
                                                 " entries, need more than K=" + std::to_string(k));
  }
  const double query_norm = norm2(query);

  struct Candidate {
    double sim;
    std::int64_t id;
    std::size_t slot;
  };
  // Scratch reused across calls on the same thread; knn stays reentrant.
  thread_local std::vector<Candidate> candidates;
  candidates.clear();
  if (query_norm > 0.0) {
    for (std::size_t slot = 0; slot < capacity_; ++slot) {
      const std::int64_t id = sample_ids_[slot];
      if (id < 0 || id == exclude_id || norms_[slot] == 0.0) continue;  // zero norm: cosine -inf
      candidates.push_back({dot(query, features_.row(slot)) / (query_norm * norms_[slot]), id, slot});
    }
  }
  if (candidates.size() < k) {
    throw Error(ErrorKind::InsufficientData,
                "knn: only " + std::to_string(candidates.size()) + " eligible entries for K=" + std::to_string(k));
  }
  auto better = [](const Candidate& a, const Candidate& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    if (a.id != b.id) return a.id < b.id;
    return a.slot < b.slot;
  };
  const auto kth = candidates.begin() + static_cast<std::ptrdiff_t>(k);
  if (k < candidates.size()) std::nth_element(candidates.begin(), kth - 1, candidates.end(), better);
  std::sort(candidates.begin(), kth, better);

  KnnResult out{std::vector<std::int64_t>(k), DenseMatrix(k, classes())};
  for (std::size_t r = 0; r < k; ++r) {
    out.ids[r] = candidates[r].id;
    auto src = predictions_.row(candidates[r].slot);
    std::copy(src.begin(), src.end(), out.predictions.row(r).begin());
  }
  return out;
}

void MemoryBank::dump_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write bank dump " + path.string());
  out << "id";
  for (std::size_t c = 0; c < feature_dim(); ++c) out << ",f" << c;
  for (std::size_t c = 0; c < classes(); ++c) out << ",p" << c;
  out << '\n';

  char buf[64];
  auto put = [&](double v) {
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    out << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
  };
  std::vector<std::size_t> slots;
  for (std::size_t s = 0; s < capacity_; ++s)
    if (sample_ids_[s] >= 0) slots.push_back(s);
  std::stable_sort(slots.begin(), slots.end(),
                   [&](std::size_t a, std::size_t b) { return sample_ids_[a] < sample_ids_[b]; });
  for (std::size_t s : slots) {
    out << sample_ids_[s];
    for (double v : features_.row(s)) put(v);
    for (double v : predictions_.row(s)) put(v);
    out << '\n';
  }
}

}  // namespace aad
