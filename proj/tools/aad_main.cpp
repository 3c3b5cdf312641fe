// Command-line front end: pretrain, adapt, sweep, eval, boundary.

#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "aad/adapt.hpp"
#include "aad/datasets.hpp"
#include "aad/error.hpp"
#include "aad/metrics.hpp"
#include "aad/model.hpp"

using namespace aad;

namespace {

double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorKind::Config, "bad number '" + s + "' in " + what);
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

// "moons" or "moons:n=300,noise=0.1,rot=30,seed=0"; anything else is a CSV path.
Dataset load_data(const std::string& where, DomainTag csv_domain) {
  if (where != "moons" && !where.starts_with("moons:")) return load_csv_dataset(where, csv_domain);
  MoonsConfig cfg;
  if (where.size() > 6) {
    for (const auto& kv : split(where.substr(6), ',')) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw Error(ErrorKind::Config, "expected key=value in '" + where + "'");
      const std::string key = kv.substr(0, eq);
      const double v = parse_double(kv.substr(eq + 1), where);
      if (key == "n") cfg.n_per_class = static_cast<std::size_t>(v);
      else if (key == "noise") cfg.noise_sigma = v;
      else if (key == "rot") cfg.rotation_deg = v;
      else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(v);
      else throw Error(ErrorKind::Config, "unknown moons option '" + key + "'");
    }
  }
  return make_twin_moons(cfg);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Adapt options shared by `adapt` and `sweep`. Flags given on the command
// line override values from --config.
struct AdaptFlags {
  std::string config;
  std::size_t k = 0, epochs = 0, batch_size = 0, ring = 0;
  double beta = 0.0, lr = 0.0, momentum = 0.0;
  std::uint64_t seed = 0;
  std::string objective;

  CLI::Option* k_opt = nullptr;
  CLI::Option* epochs_opt = nullptr;
  CLI::Option* bs_opt = nullptr;
  CLI::Option* ring_opt = nullptr;
  CLI::Option* beta_opt = nullptr;
  CLI::Option* lr_opt = nullptr;
  CLI::Option* mom_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* obj_opt = nullptr;

  void attach(CLI::App* app, bool with_beta_seed) {
    app->add_option("--config", config, "JSON file with adapt settings");
    k_opt = app->add_option("--k", k, "neighbors per sample");
    epochs_opt = app->add_option("--epochs", epochs, "adaptation epochs");
    bs_opt = app->add_option("--batch-size", batch_size, "mini-batch size");
    ring_opt = app->add_option("--ring", ring, "use a ring bank with this capacity");
    lr_opt = app->add_option("--lr", lr, "SGD learning rate");
    mom_opt = app->add_option("--momentum", momentum, "SGD momentum");
    obj_opt = app->add_option("--objective", objective,
                              "aad | attract-only | disperse-only | aad-no-decay | mi | bnm | nc");
    if (with_beta_seed) {
      beta_opt = app->add_option("--beta", beta, "decay exponent for the dispersion weight");
      seed_opt = app->add_option("--seed", seed, "shuffle seed");
    }
  }

  AdaptConfig resolve() const {
    AdaptConfig cfg;
    if (!config.empty()) cfg = adapt_config_from_json(read_text(config), cfg);
    if (k_opt->count()) cfg.k = k;
    if (epochs_opt->count()) cfg.epochs = epochs;
    if (bs_opt->count()) cfg.batch_size = batch_size;
    if (ring_opt->count()) {
      cfg.bank_mode = BankMode::Ring;
      cfg.ring_capacity = ring;
    }
    if (lr_opt->count()) cfg.lr = lr;
    if (mom_opt->count()) cfg.momentum = momentum;
    if (obj_opt->count()) cfg.objective = parse_objective(objective);
    if (beta_opt && beta_opt->count()) cfg.beta = beta;
    if (seed_opt && seed_opt->count()) cfg.seed = seed;
    validate(cfg);
    return cfg;
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Source-free adaptation by attracting and dispersing neighbors, on toy 2-D data"};
  app.require_subcommand(1);

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "train a source model with cross-entropy");
  std::string pre_data = "moons", pre_out;
  PretrainConfig pre_cfg;
  MlpDims dims;
  std::uint64_t init_seed = 0;
  pre->add_option("--data", pre_data, "CSV path or moons[:n=..,noise=..,rot=..,seed=..]");
  pre->add_option("--out", pre_out, "checkpoint path")->required();
  pre->add_option("--epochs", pre_cfg.epochs, "training epochs")->capture_default_str();
  pre->add_option("--lr", pre_cfg.lr, "SGD learning rate")->capture_default_str();
  pre->add_option("--momentum", pre_cfg.momentum, "SGD momentum")->capture_default_str();
  pre->add_option("--batch-size", pre_cfg.batch_size, "mini-batch size")->capture_default_str();
  pre->add_option("--seed", init_seed, "initialization and shuffle seed")->capture_default_str();
  pre->add_option("--hidden", dims.h1, "width of the hidden layer")->capture_default_str();
  pre->add_option("--features", dims.h_feat, "width of the feature layer")->capture_default_str();

  // adapt
  auto* ad = app.add_subcommand("adapt", "adapt a checkpoint to unlabeled target data");
  std::string ad_ckpt, ad_target = "moons:rot=30", ad_history, ad_out_ckpt, ad_dump;
  AdaptFlags ad_flags;
  ad->add_option("--ckpt", ad_ckpt, "source checkpoint")->required();
  ad->add_option("--target", ad_target, "CSV path or moons[:options]")->capture_default_str();
  ad->add_option("--out-history", ad_history, "history JSON path");
  ad->add_option("--out-ckpt", ad_out_ckpt, "adapted checkpoint path");
  ad->add_option("--dump-bank", ad_dump, "write the final memory bank as CSV");
  ad_flags.attach(ad, true);

  // sweep
  auto* sw = app.add_subcommand("sweep", "adapt over several beta values and select by SND");
  std::string sw_ckpt, sw_target = "moons:rot=30", sw_betas = "0,1,2,5", sw_out, sw_runs;
  std::size_t sw_seeds = 5;
  AdaptFlags sw_flags;
  sw->add_option("--ckpt", sw_ckpt, "source checkpoint")->required();
  sw->add_option("--target", sw_target, "CSV path or moons[:options]")->capture_default_str();
  sw->add_option("--betas", sw_betas, "comma-separated beta values")->capture_default_str();
  sw->add_option("--seeds", sw_seeds, "number of shuffle seeds, 0..n-1")->capture_default_str();
  sw->add_option("--out", sw_out, "per-beta CSV");
  sw->add_option("--out-runs", sw_runs, "per-run CSV");
  sw_flags.attach(sw, false);

  // eval
  auto* ev = app.add_subcommand("eval", "report accuracy, SND and neighbor agreement");
  std::string ev_ckpt, ev_data = "moons:rot=30", ev_out;
  std::size_t ev_k = 3;
  ev->add_option("--ckpt", ev_ckpt, "checkpoint")->required();
  ev->add_option("--data", ev_data, "CSV path or moons[:options]")->capture_default_str();
  ev->add_option("--k", ev_k, "neighbors for the agreement ratios")->capture_default_str();
  ev->add_option("--out", ev_out, "report JSON path");

  // boundary
  auto* bd = app.add_subcommand("boundary", "write the predicted label on a regular grid");
  std::string bd_ckpt, bd_out;
  std::size_t bd_res = 200;
  std::vector<double> bd_x{-2.0, 3.0}, bd_y{-1.5, 2.0};
  bd->add_option("--ckpt", bd_ckpt, "checkpoint")->required();
  bd->add_option("--out", bd_out, "grid CSV path")->required();
  bd->add_option("--resolution", bd_res, "nodes per axis")->capture_default_str();
  bd->add_option("--x-range", bd_x, "x min and max")->expected(2)->delimiter(',');
  bd->add_option("--y-range", bd_y, "y min and max")->expected(2)->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (pre->parsed()) {
      const Dataset src = load_data(pre_data, DomainTag::Source);
      dims.d_in = src.dim();
      dims.classes = std::max<std::size_t>(src.num_classes, 2);
      pre_cfg.seed = init_seed;
      const auto r = pretrain_source(init_model(dims, init_seed), src, pre_cfg);
      save_checkpoint(r.model, pre_out);
      std::cout << "source accuracy " << fmt(r.report.accuracy) << "\n";
    } else if (ad->parsed()) {
      const AdaptConfig cfg = ad_flags.resolve();
      const MlpModel model = load_checkpoint(ad_ckpt);
      const Dataset target = load_data(ad_target, DomainTag::Target);
      AdaptResult r = adapt(model, target, cfg);
      if (!ad_out_ckpt.empty()) {
        save_checkpoint(r.model, ad_out_ckpt);
        r.history.checkpoint = ad_out_ckpt;
      }
      if (!ad_history.empty()) write_text(ad_history, history_json(r.history));
      if (!ad_dump.empty()) r.bank.dump_csv(ad_dump);
      const auto& h = r.history;
      if (h.initial_acc) std::cout << "target accuracy before " << fmt(*h.initial_acc) << "\n";
      if (h.acc.back()) std::cout << "target accuracy after  " << fmt(*h.acc.back()) << "\n";
      std::cout << "snd " << fmt(h.snd.back()) << "  same-pred ratio " << fmt(h.ratio_same.back()) << "\n";
    } else if (sw->parsed()) {
      const AdaptConfig cfg = sw_flags.resolve();
      const MlpModel model = load_checkpoint(sw_ckpt);
      const Dataset target = load_data(sw_target, DomainTag::Target);
      std::vector<double> betas;
      for (const auto& b : split(sw_betas, ',')) betas.push_back(parse_double(b, "--betas"));
      std::vector<std::uint64_t> seeds(sw_seeds);
      for (std::size_t s = 0; s < sw_seeds; ++s) seeds[s] = s;
      const SweepResult r = sweep_beta(model, target, betas, cfg, seeds);
      const std::string table = sweep_csv(r);
      if (!sw_out.empty()) write_text(sw_out, table);
      if (!sw_runs.empty()) write_text(sw_runs, sweep_runs_csv(r));
      std::cout << table;
    } else if (ev->parsed()) {
      const MlpModel model = load_checkpoint(ev_ckpt);
      const Dataset data = load_data(ev_data, DomainTag::Target);
      const ForwardCache cache = forward(model, data.x);
      ReportBundle report;
      std::optional<std::span<const int>> labels;
      if (data.has_labels()) {
        report.eval = classification_report(predicted_labels(cache.predictions), data.labels,
                                            std::max(model.dims.classes, data.num_classes));
        labels = std::span<const int>(data.labels);
      }
      if (data.size() >= 2) report.snd = snd_score(cache.predictions);
      if (data.size() > ev_k) {
        MemoryBank bank(BankMode::Full, data.size(), model.dims.h_feat, model.dims.classes);
        std::vector<std::int64_t> ids(data.size());
        for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int64_t>(i);
        bank.update(ids, cache.features, cache.predictions);
        report.ratios = agreement_ratios(bank, labels, ev_k);
      }
      const std::string json = report_json(report);
      if (!ev_out.empty()) write_text(ev_out, json);
      std::cout << json << "\n";
    } else if (bd->parsed()) {
      const MlpModel model = load_checkpoint(bd_ckpt);
      const auto grid = decision_grid(model, bd_x[0], bd_x[1], bd_y[0], bd_y[1], bd_res);
      write_grid_csv(grid, bd_out);
    }
  } catch (const Error& e) {
    std::cerr << "aad: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
