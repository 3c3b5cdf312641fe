#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aad/memory_bank.hpp"
#include "aad/model.hpp"
#include "aad/numerics.hpp"

namespace aad {

struct EvalReport {
  double accuracy = 0.0;
  // nullopt for classes with no labeled samples.
  std::vector<std::optional<double>> per_class_accuracy;
  double mean_per_class = 0.0;
};

// Rows whose truth is kUnlabeled (-1) are skipped.
EvalReport classification_report(std::span<const int> predictions, std::span<const int> truth,
                                 std::size_t classes);

// Argmax label per row, ties to the lower class index.
std::vector<int> predicted_labels(const DenseMatrix& probs);

inline constexpr double kDefaultSndTau = 0.05;

// Soft neighborhood density: cosine similarity between normalized prediction
// rows, self-similarity masked, temperature softmax per row, mean row entropy.
double snd_score(const DenseMatrix& probs, double tau = kDefaultSndTau);

struct AgreementRatios {
  double same_pred = 0.0;
  // Among samples whose K neighbors all share their prediction, the fraction
  // where that prediction is also correct. Missing without labels.
  std::optional<double> correct_pred;
};

// Labels, when given, are indexed by sample id.
AgreementRatios agreement_ratios(const MemoryBank& bank, std::optional<std::span<const int>> labels,
                                 std::size_t k = 3);

struct OdaScores {
  double os_star = 0.0;
  double unk = 0.0;
  double hos = 0.0;
  double os = 0.0;
  std::size_t num_known_classes = 0;
};

// HOS = 2·OS*·UNK / (OS* + UNK); OS = (|C|·OS* + UNK) / (|C| + 1).
OdaScores open_set_scores(double os_star, double unk, std::size_t num_known);

struct DecisionGrid {
  double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;
  std::size_t resolution = 0;
  std::vector<double> xs;   // resolution node coordinates
  std::vector<double> ys;
  std::vector<int> labels;  // row-major: labels[iy * resolution + ix]

  int at(std::size_t ix, std::size_t iy) const { return labels[iy * resolution + ix]; }
};

DecisionGrid decision_grid(const MlpModel& model, double x_min, double x_max, double y_min, double y_max,
                           std::size_t resolution);
// Header `x,y,label`.
void write_grid_csv(const DecisionGrid& grid, const std::filesystem::path& path);

struct ReportBundle {
  std::optional<EvalReport> eval;
  std::optional<double> snd;
  std::optional<AgreementRatios> ratios;
  std::optional<OdaScores> oda;
};

// JSON with keys accuracy, per_class, snd, ratios, hos, os (null when absent).
std::string report_json(const ReportBundle& report);

}  // namespace aad
