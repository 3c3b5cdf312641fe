#include "aad/model.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <string>

#include <json.hpp>

#include "aad/error.hpp"

namespace aad {

namespace {

double uniform01(std::mt19937_64& rng) {
  // 53 random mantissa bits; avoids implementation-defined distributions.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void glorot_fill(DenseMatrix& w, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (double& v : w.data()) v = (2.0 * uniform01(rng) - 1.0) * a;
}

void add_bias(DenseMatrix& m, const std::vector<double>& b) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += b[c];
  }
}

std::vector<double> column_sums(const DenseMatrix& m) {
  std::vector<double> s(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) s[c] += row[c];
  }
  return s;
}

template <class F>
void for_each_tensor(MlpParams& p, F&& f) {
  f(p.w1.data());
  f(std::span<double>(p.b1));
  f(p.w2.data());
  f(std::span<double>(p.b2));
  f(p.wc.data());
  f(std::span<double>(p.bc));
}

template <class F>
void for_each_tensor(const MlpParams& p, F&& f) {
  f(p.w1.data());
  f(std::span<const double>(p.b1));
  f(p.w2.data());
  f(std::span<const double>(p.b2));
  f(p.wc.data());
  f(std::span<const double>(p.bc));
}

bool shapes_match(const MlpParams& a, const MlpParams& b) {
  return a.w1.rows() == b.w1.rows() && a.w1.cols() == b.w1.cols() && a.b1.size() == b.b1.size() &&
         a.w2.rows() == b.w2.rows() && a.w2.cols() == b.w2.cols() && a.b2.size() == b.b2.size() &&
         a.wc.rows() == b.wc.rows() && a.wc.cols() == b.wc.cols() && a.bc.size() == b.bc.size();
}

}  // namespace

MlpParams MlpParams::zeros(const MlpDims& d) {
  return MlpParams{DenseMatrix(d.d_in, d.h1),          std::vector<double>(d.h1, 0.0),
                   DenseMatrix(d.h1, d.h_feat),        std::vector<double>(d.h_feat, 0.0),
                   DenseMatrix(d.h_feat, d.classes),   std::vector<double>(d.classes, 0.0)};
}

std::size_t MlpParams::count() const {
  std::size_t n = 0;
  for_each_tensor(*this, [&](auto t) { n += t.size(); });
  return n;
}

std::vector<double> MlpParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(count());
  for_each_tensor(*this, [&](auto t) { flat.insert(flat.end(), t.begin(), t.end()); });
  return flat;
}

void MlpParams::assign(std::span<const double> flat) {
  if (flat.size() != count()) {
    throw Error(ErrorKind::Shape, "parameter vector has " + std::to_string(flat.size()) +
                                      " entries, expected " + std::to_string(count()));
  }
  std::size_t offset = 0;
  for_each_tensor(*this, [&](std::span<double> t) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), t.size(), t.begin());
    offset += t.size();
  });
}

bool MlpParams::all_finite() const {
  bool ok = true;
  for_each_tensor(*this, [&](auto t) {
    for (double v : t) ok = ok && std::isfinite(v);
  });
  return ok;
}

MlpModel init_model(const MlpDims& dims, std::uint64_t seed) {
  if (dims.d_in == 0 || dims.h1 == 0 || dims.h_feat == 0 || dims.classes == 0)
    throw Error(ErrorKind::Config, "init_model: every dimension must be at least 1");
  MlpModel model{dims, seed, MlpParams::zeros(dims), MlpParams::zeros(dims)};
  std::mt19937_64 rng(seed);
  glorot_fill(model.params.w1, rng);
  glorot_fill(model.params.w2, rng);
  glorot_fill(model.params.wc, rng);
  return model;
}

ForwardCache forward(const MlpModel& model, const DenseMatrix& inputs) {
  if (inputs.cols() != model.dims.d_in) {
    throw Error(ErrorKind::Shape, "forward: input has " + std::to_string(inputs.cols()) +
                                      " columns, model expects " + std::to_string(model.dims.d_in));
  }
  ForwardCache cache;
  cache.inputs = inputs;
  cache.hidden_pre = matmul(inputs, model.params.w1);
  add_bias(cache.hidden_pre, model.params.b1);
  cache.hidden = cache.hidden_pre;
  for (double& v : cache.hidden.data()) v = v > 0.0 ? v : 0.0;
  cache.features = matmul(cache.hidden, model.params.w2);
  add_bias(cache.features, model.params.b2);
  cache.logits = matmul(cache.features, model.params.wc);
  add_bias(cache.logits, model.params.bc);
  cache.predictions = softmax_rows(cache.logits);
  return cache;
}

MlpParams backward_from_logits(const MlpModel& model, const ForwardCache& cache,
                               const DenseMatrix& grad_logits) {
  const auto& d = model.dims;
  const std::size_t bs = cache.inputs.rows();
  const bool consistent = cache.inputs.cols() == d.d_in && cache.hidden.rows() == bs &&
                          cache.hidden.cols() == d.h1 && cache.features.rows() == bs &&
                          cache.features.cols() == d.h_feat && cache.logits.rows() == bs &&
                          cache.logits.cols() == d.classes;
  if (!consistent) throw Error(ErrorKind::StaleCache, "backward: cache shapes do not match the model");
  if (grad_logits.rows() != bs || grad_logits.cols() != d.classes)
    throw Error(ErrorKind::Shape, "backward: upstream gradient shape does not match the batch");
  if (!grad_logits.all_finite()) throw Error(ErrorKind::InvalidInput, "backward: non-finite gradient");

  MlpParams g;
  g.wc = matmul_tn(cache.features, grad_logits);
  g.bc = column_sums(grad_logits);
  DenseMatrix grad_features = matmul_nt(grad_logits, model.params.wc);
  g.w2 = matmul_tn(cache.hidden, grad_features);
  g.b2 = column_sums(grad_features);
  DenseMatrix grad_hidden = matmul_nt(grad_features, model.params.w2);
  for (std::size_t k = 0; k < grad_hidden.size(); ++k)
    if (!(cache.hidden_pre.data()[k] > 0.0)) grad_hidden.data()[k] = 0.0;
  g.w1 = matmul_tn(cache.inputs, grad_hidden);
  g.b1 = column_sums(grad_hidden);
  return g;
}

MlpParams backward(const MlpModel& model, const ForwardCache& cache, const DenseMatrix& grad_predictions) {
  if (cache.predictions.rows() != grad_predictions.rows() ||
      cache.predictions.cols() != grad_predictions.cols())
    throw Error(ErrorKind::Shape, "backward: dL/dP shape does not match the cached predictions");
  return backward_from_logits(model, cache, softmax_backward(cache.predictions, grad_predictions));
}

void sgd_step(MlpModel& model, const MlpParams& grads, double lr, double momentum) {
  if (!(lr > 0.0)) throw Error(ErrorKind::Config, "sgd_step: learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw Error(ErrorKind::Config, "sgd_step: momentum must lie in [0, 1)");
  if (!shapes_match(model.params, grads)) throw Error(ErrorKind::Shape, "sgd_step: gradient shapes differ");
  if (!grads.all_finite()) throw Error(ErrorKind::Divergence, "sgd_step: non-finite gradient");

  std::vector<double> theta = model.params.flatten();
  std::vector<double> vel = model.velocity.flatten();
  const std::vector<double> g = grads.flatten();
  for (std::size_t k = 0; k < theta.size(); ++k) {
    vel[k] = momentum * vel[k] + g[k];
    theta[k] -= lr * vel[k];
  }
  model.params.assign(theta);
  model.velocity.assign(vel);
}

void save_checkpoint(const MlpModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format_version"] = kCheckpointVersion;
  j["dims"] = {{"d_in", model.dims.d_in},
               {"h1", model.dims.h1},
               {"h_feat", model.dims.h_feat},
               {"classes", model.dims.classes}};
  j["seed"] = model.seed;
  const auto& p = model.params;
  j["params"] = {{"w1", p.w1.values()}, {"b1", p.b1}, {"w2", p.w2.values()},
                 {"b2", p.b2},          {"wc", p.wc.values()}, {"bc", p.bc}};
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write checkpoint " + path.string());
  out << j.dump(1) << '\n';
}

MlpModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    if (j.at("format_version").get<int>() != kCheckpointVersion)
      throw Error(ErrorKind::Parse, "unsupported checkpoint version");
    const auto& jd = j.at("dims");
    MlpDims dims{jd.at("d_in").get<std::size_t>(), jd.at("h1").get<std::size_t>(),
                 jd.at("h_feat").get<std::size_t>(), jd.at("classes").get<std::size_t>()};
    MlpModel model = init_model(dims, j.at("seed").get<std::uint64_t>());
    const auto& jp = j.at("params");
    auto matrix = [&](const char* key, std::size_t r, std::size_t c) {
      return DenseMatrix(r, c, jp.at(key).get<std::vector<double>>());
    };
    auto vec = [&](const char* key, std::size_t n) {
      auto v = jp.at(key).get<std::vector<double>>();
      if (v.size() != n) throw Error(ErrorKind::Parse, std::string("checkpoint bias ") + key + " has wrong length");
      return v;
    };
    model.params.w1 = matrix("w1", dims.d_in, dims.h1);
    model.params.b1 = vec("b1", dims.h1);
    model.params.w2 = matrix("w2", dims.h1, dims.h_feat);
    model.params.b2 = vec("b2", dims.h_feat);
    model.params.wc = matrix("wc", dims.h_feat, dims.classes);
    model.params.bc = vec("bc", dims.classes);
    if (!model.params.all_finite()) throw Error(ErrorKind::Parse, "checkpoint holds non-finite parameters");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, "checkpoint " + path.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Shape) throw Error(ErrorKind::Parse, e.what());
    throw;
  }
}

}  // namespace aad
