#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aad/datasets.hpp"
#include "aad/memory_bank.hpp"
#include "aad/metrics.hpp"
#include "aad/model.hpp"

namespace aad {

enum class Objective { AaD, AttractOnly, DisperseOnly, AaDNoDecay, MI, BNM, NC };

std::string_view to_string(Objective objective);
Objective parse_objective(std::string_view name);

struct PretrainConfig {
  std::size_t epochs = 200;
  double lr = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

// Defaults are the settings used for the rotated-moons experiment.
struct AdaptConfig {
  std::size_t k = 3;
  double beta = 5.0;
  std::size_t batch_size = 64;
  std::size_t epochs = 100;
  double lr = 0.002;
  double momentum = 0.9;
  BankMode bank_mode = BankMode::Full;
  std::size_t ring_capacity = 0;  // Ring mode only
  std::uint64_t seed = 0;
  Objective objective = Objective::AaD;
  double snd_tau = kDefaultSndTau;
  std::size_t ratio_k = 3;
};

// Throws Config unless batch_size >= 2, k >= 1, k < batch_size - 1 and the
// optimizer settings are usable.
void validate(const AdaptConfig& cfg);

// Overrides fields of `base` with keys present in a JSON object: k, beta,
// batch_size, epochs, lr, momentum, bank_mode ("full"|"ring"), ring_capacity,
// seed, objective, snd_tau, ratio_k.
AdaptConfig adapt_config_from_json(std::string_view json_text, AdaptConfig base = {});

struct RunHistory {
  std::size_t iterations_per_epoch = 0;
  // per iteration
  std::vector<double> loss;
  std::vector<double> lambda;
  // per epoch; accuracy and ratio_correct are missing without target labels
  std::vector<std::optional<double>> acc;
  std::vector<double> snd;
  std::vector<double> ratio_same;
  std::vector<std::optional<double>> ratio_correct;
  // before the first update
  std::optional<double> initial_acc;
  double initial_snd = 0.0;
  std::optional<std::string> checkpoint;
};

// JSON arrays keyed loss, lambda, acc, snd, ratio_same, ratio_correct plus
// scalar bookkeeping.
std::string history_json(const RunHistory& history);

struct PretrainResult {
  MlpModel model;
  EvalReport report;
};

// Cross-entropy SGD on a labeled source set. Throws Label when any source
// row is unlabeled.
PretrainResult pretrain_source(MlpModel model, const Dataset& source, const PretrainConfig& cfg);

// Fresh forward pass over the whole set.
DenseMatrix predict(const MlpModel& model, const DenseMatrix& x);
EvalReport evaluate(const MlpModel& model, const Dataset& ds);

struct AdaptResult {
  MlpModel model;
  RunHistory history;
  MemoryBank bank;
};

// Source-free adaptation on unlabeled target data. Target labels, when
// present, are only read to fill the accuracy fields of the history.
AdaptResult adapt(MlpModel model, const Dataset& target, const AdaptConfig& cfg);

struct SweepRun {
  double beta = 0.0;
  std::uint64_t seed = 0;
  double snd = 0.0;
  std::optional<double> accuracy;
};

struct SweepRow {
  double beta = 0.0;
  double snd = 0.0;                 // mean over seeds
  std::optional<double> accuracy;   // mean over seeds
  bool selected = false;            // argmax of snd, first on ties
};

struct SweepResult {
  std::vector<SweepRun> runs;
  std::vector<SweepRow> rows;
  std::size_t selected = 0;
};

// Runs adapt from the same checkpoint for every (beta, seed) pair.
SweepResult sweep_beta(const MlpModel& checkpoint, const Dataset& target, std::span<const double> betas,
                       const AdaptConfig& base, std::span<const std::uint64_t> seeds);

// `beta,snd,accuracy,selected` per row.
std::string sweep_csv(const SweepResult& result);
// `beta,seed,snd,accuracy` per run.
std::string sweep_runs_csv(const SweepResult& result);

}  // namespace aad
