#include "aad/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "aad/datasets.hpp"
#include "aad/error.hpp"

namespace aad {

EvalReport classification_report(std::span<const int> predictions, std::span<const int> truth,
                                  std::size_t classes) {
  if (predictions.size() != truth.size())
    throw Error(ErrorKind::Shape, "classification_report: predictions and truth differ in length");
  std::vector<std::size_t> hits(classes, 0), totals(classes, 0);
  std::size_t correct = 0, counted = 0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const int t = truth[k];
    if (t == kUnlabeled) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= classes)
      throw Error(ErrorKind::Label, "classification_report: truth label out of range");
    ++counted;
    ++totals[static_cast<std::size_t>(t)];
    if (predictions[k] == t) {
      ++correct;
      ++hits[static_cast<std::size_t>(t)];
    }
  }
  EvalReport rep;
  rep.accuracy = counted == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(counted);
  rep.per_class_accuracy.resize(classes);
  double sum = 0.0;
  std::size_t defined = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    if (totals[c] == 0) continue;
    const double acc = static_cast<double>(hits[c]) / static_cast<double>(totals[c]);
    rep.per_class_accuracy[c] = acc;
    sum += acc;
    ++defined;
  }
  rep.mean_per_class = defined == 0 ? 0.0 : sum / static_cast<double>(defined);
  return rep;
}

std::vector<int> predicted_labels(const DenseMatrix& probs) {
  std::vector<int> out(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) out[r] = static_cast<int>(argmax(probs.row(r)));
  return out;
}

double snd_score(const DenseMatrix& probs, double tau) {
  const std::size_t n = probs.rows();
  if (n < 2) throw Error(ErrorKind::Size, "snd_score: need at least 2 rows");
  if (!(tau > 0.0)) throw Error(ErrorKind::Config, "snd_score: temperature must be positive");
  const DenseMatrix unit = l2_normalize_rows(probs);

  // Cosines are <= 1, so shifting every logit by 1/tau keeps exp() <= 1 and
  // lets the symmetric pair (i, j) share one exponential. Rows whose
  // partition underflows are redone with their own max.
  DenseMatrix logits(n, n);
  DenseMatrix weights(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double l = (dot(unit.row(i), unit.row(j)) - 1.0) / tau;
      logits(i, j) = logits(j, i) = l;
      weights(i, j) = weights(j, i) = std::exp(l);
    }

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto l = logits.row(i);
    auto w = weights.row(i);
    double z = 0.0, weighted = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      z += w[j];
      weighted += w[j] * l[j];
    }
    if (!(z > 1e-200)) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) mx = std::max(mx, l[j]);
      z = 0.0;
      weighted = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double e = std::exp(l[j] - mx);
        z += e;
        weighted += e * (l[j] - mx);
      }
    }
    // H = -Σ q log q with q = w / z, i.e. log z - Σ w l / z.
    total += std::max(0.0, std::log(z) - weighted / z);
  }
  return total / static_cast<double>(n);
}

AgreementRatios agreement_ratios(const MemoryBank& bank, std::optional<std::span<const int>> labels,
                                 std::size_t k) {
  if (bank.filled() <= k) throw Error(ErrorKind::InsufficientData, "agreement_ratios: bank too small");
  const auto& ids = bank.sample_ids();
  std::size_t considered = 0, agreeing = 0, agreeing_correct = 0;
  for (std::size_t slot = 0; slot < bank.capacity(); ++slot) {
    const std::int64_t id = ids[slot];
    if (id < 0) continue;
    ++considered;
    const std::size_t own = argmax(bank.predictions().row(slot));
    const KnnResult nn = bank.knn(bank.features().row(slot), k, id);
    bool all_same = true;
    for (std::size_t r = 0; r < k && all_same; ++r) all_same = argmax(nn.predictions.row(r)) == own;
    if (!all_same) continue;
    ++agreeing;
    if (labels) {
      if (static_cast<std::size_t>(id) >= labels->size())
        throw Error(ErrorKind::Index, "agreement_ratios: no label for sample id " + std::to_string(id));
      if ((*labels)[static_cast<std::size_t>(id)] == static_cast<int>(own)) ++agreeing_correct;
    }
  }
  AgreementRatios out;
  out.same_pred = static_cast<double>(agreeing) / static_cast<double>(considered);
  if (labels)
    out.correct_pred = agreeing == 0 ? 0.0 : static_cast<double>(agreeing_correct) / static_cast<double>(agreeing);
  return out;
}

OdaScores open_set_scores(double os_star, double unk, std::size_t num_known) {
  OdaScores s{os_star, unk, 0.0, 0.0, num_known};
  const double sum = os_star + unk;
  s.hos = sum == 0.0 ? 0.0 : 2.0 * os_star * unk / sum;
  const double known = static_cast<double>(num_known);
  s.os = (known * os_star) / (known + 1.0) + unk / (known + 1.0);
  return s;
}

DecisionGrid decision_grid(const MlpModel& model, double x_min, double x_max, double y_min, double y_max,
                           std::size_t resolution) {
  if (resolution < 2) throw Error(ErrorKind::Config, "decision_grid: resolution must be at least 2");
  if (model.dims.d_in != 2) throw Error(ErrorKind::Shape, "decision_grid: model input must be 2-D");
  if (!(x_max > x_min) || !(y_max > y_min)) throw Error(ErrorKind::Config, "decision_grid: empty range");
  DecisionGrid g{x_min, x_max, y_min, y_max, resolution, {}, {}, {}};
  const double step = 1.0 / static_cast<double>(resolution - 1);
  for (std::size_t k = 0; k < resolution; ++k) {
    g.xs.push_back(x_min + (x_max - x_min) * static_cast<double>(k) * step);
    g.ys.push_back(y_min + (y_max - y_min) * static_cast<double>(k) * step);
  }
  DenseMatrix nodes(resolution * resolution, 2);
  for (std::size_t iy = 0; iy < resolution; ++iy)
    for (std::size_t ix = 0; ix < resolution; ++ix) {
      nodes(iy * resolution + ix, 0) = g.xs[ix];
      nodes(iy * resolution + ix, 1) = g.ys[iy];
    }
  g.labels = predicted_labels(forward(model, nodes).predictions);
  return g;
}

void write_grid_csv(const DecisionGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "x,y,label\n";
  char bx[64], by[64];
  for (std::size_t iy = 0; iy < grid.resolution; ++iy)
    for (std::size_t ix = 0; ix < grid.resolution; ++ix) {
      auto ex = std::to_chars(bx, bx + sizeof bx, grid.xs[ix], std::chars_format::general, 17).ptr;
      auto ey = std::to_chars(by, by + sizeof by, grid.ys[iy], std::chars_format::general, 17).ptr;
      out << std::string_view(bx, static_cast<std::size_t>(ex - bx)) << ','
          << std::string_view(by, static_cast<std::size_t>(ey - by)) << ',' << grid.at(ix, iy) << '\n';
    }
}

std::string report_json(const ReportBundle& report) {
  nlohmann::json j;
  j["accuracy"] = nullptr;
  j["per_class"] = nullptr;
  if (report.eval) {
    j["accuracy"] = report.eval->accuracy;
    auto per_class = nlohmann::json::array();
    for (const auto& a : report.eval->per_class_accuracy) per_class.push_back(a ? nlohmann::json(*a) : nullptr);
    j["per_class"] = per_class;
    j["mean_per_class"] = report.eval->mean_per_class;
  }
  j["snd"] = report.snd ? nlohmann::json(*report.snd) : nullptr;
  j["ratios"] = nullptr;
  if (report.ratios) {
    j["ratios"] = {{"same", report.ratios->same_pred},
                   {"correct", report.ratios->correct_pred ? nlohmann::json(*report.ratios->correct_pred)
                                                           : nlohmann::json(nullptr)}};
  }
  j["hos"] = report.oda ? nlohmann::json(report.oda->hos) : nullptr;
  j["os"] = report.oda ? nlohmann::json(report.oda->os) : nullptr;
  return j.dump(2);
}

}  // namespace aad
