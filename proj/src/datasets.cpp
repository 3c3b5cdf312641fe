#include "aad/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

#include "aad/error.hpp"

namespace aad {

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Box-Muller on the same bit source, so datasets do not depend on the
// standard library's distribution implementations.
double standard_normal(std::mt19937_64& rng) {
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

template <class T>
T parse_number(std::string_view cell, std::size_t line_no) {
  T value{};
  const auto* first = cell.data();
  const auto* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (cell.empty() || ec != std::errc() || ptr != last) {
    throw Error(ErrorKind::Parse,
                "line " + std::to_string(line_no) + ": '" + std::string(cell) + "' is not a number");
  }
  return value;
}

void append_double(std::string& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  out.append(buf, res.ptr);
}

}  // namespace

bool Dataset::has_labels() const {
  return std::any_of(labels.begin(), labels.end(), [](int l) { return l != kUnlabeled; });
}

Dataset Dataset::without_labels() const {
  Dataset out = *this;
  std::fill(out.labels.begin(), out.labels.end(), kUnlabeled);
  return out;
}

Dataset make_twin_moons(const MoonsConfig& cfg) {
  if (cfg.n_per_class == 0) throw Error(ErrorKind::Config, "make_twin_moons: n_per_class must be at least 1");
  if (!(cfg.noise_sigma >= 0.0)) throw Error(ErrorKind::Config, "make_twin_moons: noise must be non-negative");
  std::mt19937_64 rng(cfg.seed);
  Dataset ds{DenseMatrix(2 * cfg.n_per_class, 2), std::vector<int>(2 * cfg.n_per_class),
             DomainTag::Source, 2};
  for (int cls = 0; cls < 2; ++cls) {
    for (std::size_t k = 0; k < cfg.n_per_class; ++k) {
      const std::size_t r = static_cast<std::size_t>(cls) * cfg.n_per_class + k;
      const double t = std::numbers::pi * uniform01(rng);
      const double nx = cfg.noise_sigma * standard_normal(rng);
      const double ny = cfg.noise_sigma * standard_normal(rng);
      if (cls == 0) {
        ds.x(r, 0) = std::cos(t) + nx;
        ds.x(r, 1) = std::sin(t) + ny;
      } else {
        ds.x(r, 0) = 1.0 - std::cos(t) + nx;
        ds.x(r, 1) = 0.5 - std::sin(t) + ny;
      }
      ds.labels[r] = cls;
    }
  }
  if (cfg.rotation_deg != 0.0) return rotate_dataset(ds, cfg.rotation_deg);
  return ds;
}

Dataset rotate_dataset(const Dataset& ds, double degrees) {
  if (ds.dim() != 2) throw Error(ErrorKind::Shape, "rotate_dataset: data must be 2-D");
  Dataset out = ds;
  out.domain = DomainTag::Target;
  if (ds.size() == 0) return out;
  double cx = 0.0, cy = 0.0;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    cx += ds.x(r, 0);
    cy += ds.x(r, 1);
  }
  cx /= static_cast<double>(ds.size());
  cy /= static_cast<double>(ds.size());
  const double rad = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  for (std::size_t r = 0; r < ds.size(); ++r) {
    const double dx = ds.x(r, 0) - cx;
    const double dy = ds.x(r, 1) - cy;
    out.x(r, 0) = cx + c * dx - s * dy;
    out.x(r, 1) = cy + s * dx + c * dy;
  }
  return out;
}

Dataset make_open_set_variant(const Dataset& ds, std::size_t n_unknown, std::uint64_t seed) {
  if (ds.dim() != 2) throw Error(ErrorKind::Shape, "make_open_set_variant: data must be 2-D");
  if (n_unknown == 0) return ds;
  std::mt19937_64 rng(seed);
  std::vector<double> values(ds.x.values());
  values.reserve(values.size() + 2 * n_unknown);
  Dataset out = ds;
  for (std::size_t k = 0; k < n_unknown; ++k) {
    values.push_back(0.5 + 0.1 * standard_normal(rng));
    values.push_back(-1.5 + 0.1 * standard_normal(rng));
    out.labels.push_back(kUnlabeled);
  }
  out.x = DenseMatrix(ds.size() + n_unknown, 2, std::move(values));
  return out;
}

void save_csv_dataset(const Dataset& ds, const std::filesystem::path& path) {
  if (ds.labels.size() != ds.size()) throw Error(ErrorKind::Shape, "save_csv_dataset: one label per row required");
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  const bool with_labels = ds.has_labels();
  out << "d=" << ds.dim() << ",labels=" << (with_labels ? 1 : 0) << '\n';
  std::string line;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    line.clear();
    for (std::size_t c = 0; c < ds.dim(); ++c) {
      if (c > 0) line.push_back(',');
      append_double(line, ds.x(r, c));
    }
    if (with_labels) {
      line.push_back(',');
      line += std::to_string(ds.labels[r]);
    }
    out << line << '\n';
  }
}

Dataset load_csv_dataset(const std::filesystem::path& path, DomainTag domain) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Parse, "empty file, missing header");

  std::size_t dim = 0;
  int has_label_col = -1;
  for (std::string_view cell : split_commas(line)) {
    if (cell.starts_with("d=")) {
      dim = parse_number<std::size_t>(cell.substr(2), 1);
    } else if (cell.starts_with("labels=")) {
      has_label_col = parse_number<int>(cell.substr(7), 1);
    } else {
      throw Error(ErrorKind::Parse, "missing header: expected d=<int>,labels=<0|1>");
    }
  }
  if (dim == 0 || (has_label_col != 0 && has_label_col != 1))
    throw Error(ErrorKind::Parse, "missing header: expected d=<int>,labels=<0|1>");

  const std::size_t width = dim + static_cast<std::size_t>(has_label_col);
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != width) {
      throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(width) + " cells, found " +
                                        std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < dim; ++c) {
      const double v = parse_number<double>(cells[c], line_no);
      if (!std::isfinite(v)) throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": non-finite value");
      values.push_back(v);
    }
    if (has_label_col == 1) {
      const int label = parse_number<int>(cells[dim], line_no);
      if (label < kUnlabeled) throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": bad label");
      labels.push_back(label);
    } else {
      labels.push_back(kUnlabeled);
    }
  }
  if (labels.empty()) throw Error(ErrorKind::Parse, "no data rows");

  Dataset ds;
  ds.x = DenseMatrix(labels.size(), dim, std::move(values));
  ds.labels = std::move(labels);
  ds.domain = domain;
  const int max_label = *std::max_element(ds.labels.begin(), ds.labels.end());
  ds.num_classes = max_label < 0 ? 0 : static_cast<std::size_t>(max_label) + 1;
  return ds;
}

}  // namespace aad
