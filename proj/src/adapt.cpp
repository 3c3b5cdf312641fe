#include "aad/adapt.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "aad/error.hpp"
#include "aad/objectives.hpp"

namespace aad {

namespace {

// Fisher-Yates on raw generator output so the order depends only on the seed.
void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

DenseMatrix gather_rows(const DenseMatrix& m, std::span<const std::size_t> rows) {
  DenseMatrix out(rows.size(), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto src = m.row(rows[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

std::optional<std::span<const int>> reporting_labels(const Dataset& ds) {
  if (!ds.has_labels()) return std::nullopt;
  return std::span<const int>(ds.labels);
}

nlohmann::json optional_array(const std::vector<std::optional<double>>& v) {
  auto a = nlohmann::json::array();
  for (const auto& x : v) a.push_back(x ? nlohmann::json(*x) : nlohmann::json(nullptr));
  return a;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string_view to_string(Objective objective) {
  switch (objective) {
    case Objective::AaD: return "aad";
    case Objective::AttractOnly: return "attract-only";
    case Objective::DisperseOnly: return "disperse-only";
    case Objective::AaDNoDecay: return "aad-no-decay";
    case Objective::MI: return "mi";
    case Objective::BNM: return "bnm";
    case Objective::NC: return "nc";
  }
  return "aad";
}

Objective parse_objective(std::string_view name) {
  for (Objective o : {Objective::AaD, Objective::AttractOnly, Objective::DisperseOnly, Objective::AaDNoDecay,
                      Objective::MI, Objective::BNM, Objective::NC}) {
    if (to_string(o) == name) return o;
  }
  throw Error(ErrorKind::Config, "unknown objective '" + std::string(name) + "'");
}

void validate(const AdaptConfig& cfg) {
  if (cfg.batch_size < 2) throw Error(ErrorKind::Config, "batch_size must be at least 2");
  if (cfg.k == 0) throw Error(ErrorKind::Config, "K must be at least 1");
  if (cfg.k >= cfg.batch_size - 1)
    throw Error(ErrorKind::Config, "K must be smaller than batch_size - 1 so that |close| < |background|");
  if (!(cfg.beta >= 0.0)) throw Error(ErrorKind::Config, "beta must be non-negative");
  if (cfg.epochs == 0) throw Error(ErrorKind::Config, "epochs must be at least 1");
  if (!(cfg.lr > 0.0)) throw Error(ErrorKind::Config, "lr must be positive");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) throw Error(ErrorKind::Config, "momentum must lie in [0, 1)");
  if (cfg.bank_mode == BankMode::Ring && cfg.ring_capacity <= std::max(cfg.k, cfg.ratio_k))
    throw Error(ErrorKind::Config, "ring capacity must exceed K");
  if (!(cfg.snd_tau > 0.0)) throw Error(ErrorKind::Config, "snd_tau must be positive");
  if (cfg.ratio_k == 0) throw Error(ErrorKind::Config, "ratio_k must be at least 1");
}

AdaptConfig adapt_config_from_json(std::string_view json_text, AdaptConfig base) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::Parse, "config: expected a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "k") base.k = value.get<std::size_t>();
      else if (key == "beta") base.beta = value.get<double>();
      else if (key == "batch_size") base.batch_size = value.get<std::size_t>();
      else if (key == "epochs") base.epochs = value.get<std::size_t>();
      else if (key == "lr") base.lr = value.get<double>();
      else if (key == "momentum") base.momentum = value.get<double>();
      else if (key == "ring_capacity") base.ring_capacity = value.get<std::size_t>();
      else if (key == "seed") base.seed = value.get<std::uint64_t>();
      else if (key == "objective") base.objective = parse_objective(value.get<std::string>());
      else if (key == "snd_tau") base.snd_tau = value.get<double>();
      else if (key == "ratio_k") base.ratio_k = value.get<std::size_t>();
      else if (key == "bank_mode") {
        const auto mode = value.get<std::string>();
        if (mode == "full") base.bank_mode = BankMode::Full;
        else if (mode == "ring") base.bank_mode = BankMode::Ring;
        else throw Error(ErrorKind::Config, "config: bank_mode must be 'full' or 'ring'");
      } else {
        throw Error(ErrorKind::Config, "config: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("config: ") + e.what());
  }
  return base;
}

std::string history_json(const RunHistory& h) {
  nlohmann::json j;
  j["iterations_per_epoch"] = h.iterations_per_epoch;
  j["epochs"] = h.snd.size();
  j["loss"] = h.loss;
  j["lambda"] = h.lambda;
  j["acc"] = optional_array(h.acc);
  j["snd"] = h.snd;
  j["ratio_same"] = h.ratio_same;
  j["ratio_correct"] = optional_array(h.ratio_correct);
  j["initial_acc"] = h.initial_acc ? nlohmann::json(*h.initial_acc) : nlohmann::json(nullptr);
  j["initial_snd"] = h.initial_snd;
  j["checkpoint"] = h.checkpoint ? nlohmann::json(*h.checkpoint) : nlohmann::json(nullptr);
  return j.dump(1);
}

DenseMatrix predict(const MlpModel& model, const DenseMatrix& x) { return forward(model, x).predictions; }

EvalReport evaluate(const MlpModel& model, const Dataset& ds) {
  const std::size_t classes = std::max(model.dims.classes, ds.num_classes);
  return classification_report(predicted_labels(predict(model, ds.x)), ds.labels, classes);
}

PretrainResult pretrain_source(MlpModel model, const Dataset& source, const PretrainConfig& cfg) {
  if (source.size() == 0) throw Error(ErrorKind::Size, "pretrain_source: empty source set");
  if (std::any_of(source.labels.begin(), source.labels.end(),
                  [](int l) { return l == kUnlabeled; }))
    throw Error(ErrorKind::Label, "pretrain_source: source data must be fully labeled");
  if (cfg.batch_size == 0) throw Error(ErrorKind::Config, "pretrain_source: batch_size must be at least 1");

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(source.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> batch_labels;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_indices(order, rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::span<const std::size_t> rows(order.data() + start, stop - start);
      batch_labels.clear();
      for (std::size_t r : rows) batch_labels.push_back(source.labels[r]);
      const ForwardCache cache = forward(model, gather_rows(source.x, rows));
      const LossResult ce = cross_entropy_loss(cache.predictions, batch_labels);
      sgd_step(model, backward(model, cache, ce.grad), cfg.lr, cfg.momentum);
    }
  }
  EvalReport report = evaluate(model, source);
  return {std::move(model), std::move(report)};
}

AdaptResult adapt(MlpModel model, const Dataset& target, const AdaptConfig& cfg) {
  validate(cfg);
  const std::size_t n = target.size();
  if (n < cfg.batch_size)
    throw Error(ErrorKind::Config, "adapt: target has fewer samples than one batch");
  if (target.dim() != model.dims.d_in) throw Error(ErrorKind::Shape, "adapt: target width does not match model");

  const std::size_t classes = model.dims.classes;
  const std::size_t capacity = cfg.bank_mode == BankMode::Full ? n : cfg.ring_capacity;
  MemoryBank bank(cfg.bank_mode, capacity, model.dims.h_feat, classes);
  const auto labels = reporting_labels(target);

  std::vector<std::int64_t> all_ids(n);
  std::iota(all_ids.begin(), all_ids.end(), 0);

  RunHistory history;
  history.iterations_per_epoch = n / cfg.batch_size;
  const std::size_t max_iter = cfg.epochs * history.iterations_per_epoch;
  {
    const ForwardCache full = forward(model, target.x);
    if (cfg.bank_mode == BankMode::Full) bank.update(all_ids, full.features, full.predictions);
    if (labels)
      history.initial_acc =
          classification_report(predicted_labels(full.predictions), *labels, std::max(classes, target.num_classes))
              .accuracy;
    history.initial_snd = snd_score(full.predictions, cfg.snd_tau);
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::int64_t> batch_ids(cfg.batch_size);
  std::vector<DenseMatrix> neighbors(cfg.batch_size);
  const std::vector<DenseMatrix> no_neighbors(cfg.batch_size, DenseMatrix(0, classes));
  const std::vector<std::vector<double>> unit_weights(cfg.batch_size, std::vector<double>(cfg.k, 1.0));

  std::size_t iter = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_indices(order, rng);
    for (std::size_t b = 0; b < history.iterations_per_epoch; ++b, ++iter) {
      std::span<const std::size_t> rows(order.data() + b * cfg.batch_size, cfg.batch_size);
      for (std::size_t r = 0; r < rows.size(); ++r) batch_ids[r] = static_cast<std::int64_t>(rows[r]);

      const ForwardCache cache = forward(model, gather_rows(target.x, rows));
      bank.update(batch_ids, cache.features, cache.predictions);
      for (std::size_t r = 0; r < rows.size(); ++r)
        neighbors[r] = bank.knn(cache.features.row(r), cfg.k, batch_ids[r]).predictions;

      const double scheduled = lambda_schedule(iter, max_iter, cfg.beta);
      LossResult loss;
      double lambda = 0.0;
      switch (cfg.objective) {
        case Objective::AaD:
          lambda = scheduled;
          loss = aad_loss(cache.predictions, neighbors, lambda);
          break;
        case Objective::AttractOnly:
          loss = aad_loss(cache.predictions, neighbors, 0.0);
          break;
        case Objective::DisperseOnly:
          lambda = scheduled;
          loss = aad_loss(cache.predictions, no_neighbors, lambda);
          break;
        case Objective::AaDNoDecay:
          lambda = 1.0;
          loss = aad_loss(cache.predictions, neighbors, lambda);
          break;
        case Objective::MI:
          loss = mi_loss(cache.predictions);
          break;
        case Objective::BNM:
          loss = bnm_loss(cache.predictions, BnmVariant::Nuclear);
          break;
        case Objective::NC:
          loss = nc_loss(cache.predictions, neighbors, unit_weights, NcMode::Identity);
          break;
      }
      history.loss.push_back(loss.value);
      history.lambda.push_back(lambda);
      sgd_step(model, backward(model, cache, loss.grad), cfg.lr, cfg.momentum);
    }

    const DenseMatrix probs = predict(model, target.x);
    if (labels) {
      history.acc.push_back(
          classification_report(predicted_labels(probs), *labels, std::max(classes, target.num_classes)).accuracy);
    } else {
      history.acc.push_back(std::nullopt);
    }
    history.snd.push_back(snd_score(probs, cfg.snd_tau));
    const AgreementRatios ratios = agreement_ratios(bank, labels, cfg.ratio_k);
    history.ratio_same.push_back(ratios.same_pred);
    history.ratio_correct.push_back(ratios.correct_pred);
  }
  return {std::move(model), std::move(history), std::move(bank)};
}

SweepResult sweep_beta(const MlpModel& checkpoint, const Dataset& target, std::span<const double> betas,
                       const AdaptConfig& base, std::span<const std::uint64_t> seeds) {
  if (betas.empty()) throw Error(ErrorKind::Config, "sweep_beta: no beta values");
  if (seeds.empty()) throw Error(ErrorKind::Config, "sweep_beta: no seeds");
  SweepResult result;
  for (double beta : betas) {
    SweepRow row{beta, 0.0, std::nullopt, false};
    double acc_sum = 0.0;
    bool have_acc = true;
    for (std::uint64_t seed : seeds) {
      AdaptConfig cfg = base;
      cfg.beta = beta;
      cfg.seed = seed;
      const AdaptResult run = adapt(checkpoint, target, cfg);
      SweepRun cell{beta, seed, run.history.snd.back(), run.history.acc.back()};
      row.snd += cell.snd;
      if (cell.accuracy) acc_sum += *cell.accuracy;
      else have_acc = false;
      result.runs.push_back(cell);
    }
    row.snd /= static_cast<double>(seeds.size());
    if (have_acc) row.accuracy = acc_sum / static_cast<double>(seeds.size());
    result.rows.push_back(row);
  }
  for (std::size_t r = 1; r < result.rows.size(); ++r)
    if (result.rows[r].snd > result.rows[result.selected].snd) result.selected = r;
  result.rows[result.selected].selected = true;
  return result;
}

std::string sweep_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "beta,snd,accuracy,selected\n";
  for (const auto& row : result.rows) {
    out << format_double(row.beta) << ',' << format_double(row.snd) << ','
        << (row.accuracy ? format_double(*row.accuracy) : std::string()) << ',' << (row.selected ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string sweep_runs_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "beta,seed,snd,accuracy\n";
  for (const auto& run : result.runs) {
    out << format_double(run.beta) << ',' << run.seed << ',' << format_double(run.snd) << ','
        << (run.accuracy ? format_double(*run.accuracy) : std::string()) << '\n';
  }
  return out.str();
}

}  // namespace aad
