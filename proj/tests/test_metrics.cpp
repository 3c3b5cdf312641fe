#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "aad/datasets.hpp"
#include "aad/metrics.hpp"
#include "aad/model.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace aad;
using aad::test::kind_of;

TEST_CASE("classification_report") {
  const std::vector<int> truth{0, 1, 2, 1, 0};
  const auto perfect = classification_report(truth, truth, 3);
  CHECK(perfect.accuracy == 1.0);
  for (const auto& a : perfect.per_class_accuracy) CHECK(*a == 1.0);

  const std::vector<int> zeros{0, 0, 0, 0}, balanced{0, 1, 0, 1};
  const auto half = classification_report(zeros, balanced, 2);
  CHECK(half.accuracy == 0.5);
  CHECK(*half.per_class_accuracy[0] == 1.0);
  CHECK(*half.per_class_accuracy[1] == 0.0);
  CHECK(half.mean_per_class == 0.5);

  const std::vector<int> pred{0, 1, 1}, t3{0, 1, 0};
  const auto missing = classification_report(pred, t3, 3);
  CHECK_FALSE(missing.per_class_accuracy[2].has_value());
  CHECK(missing.mean_per_class == doctest::Approx(0.75));

  const std::vector<int> with_unknown{0, -1, 1};
  const std::vector<int> mixed{0, 0, 0};
  CHECK(classification_report(mixed, with_unknown, 2).accuracy == 0.5);
  CHECK(classification_report(pred, with_unknown, 2).accuracy == 1.0);
  CHECK(kind_of([&] { classification_report(pred, zeros, 2); }) == ErrorKind::Shape);
}

TEST_CASE("predicted_labels ties go to the lower class") {
  CHECK(predicted_labels(DenseMatrix{{0.5, 0.5}, {0.2, 0.8}, {0.4, 0.3}}) == std::vector<int>{0, 1, 0});
}

TEST_CASE("snd_score") {
  DenseMatrix same(5, 3);
  for (std::size_t r = 0; r < 5; ++r) same(r, 0) = 0.2, same(r, 1) = 0.3, same(r, 2) = 0.5;
  CHECK(snd_score(same) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(snd_score(DenseMatrix{{0.9, 0.1}, {0.3, 0.7}}) == 0.0);
  CHECK(snd_score(DenseMatrix{{1.0, 0.0}, {0.9, 0.1}, {0.0, 1.0}, {0.2, 0.8}}, 1e-6) <= 1e-12);
  CHECK(kind_of([] { snd_score(DenseMatrix{{0.5, 0.5}}); }) == ErrorKind::Size);

  SUBCASE("row permutation and row rescaling leave it unchanged") {
    auto g = oracle::rng(40);
    const DenseMatrix p = oracle::random_simplex_rows(g, 30, 4);
    DenseMatrix rev(30, 4), scaled = p;
    for (std::size_t r = 0; r < 30; ++r)
      for (std::size_t c = 0; c < 4; ++c) rev(r, c) = p(29 - r, c);
    for (double& v : scaled.row(7)) v *= 3.5;
    const double base = snd_score(p);
    CHECK(snd_score(rev) == doctest::Approx(base).epsilon(1e-12));
    CHECK(snd_score(scaled) == doctest::Approx(base).epsilon(1e-12));
  }

  SUBCASE("matches the unoptimized definition") {
    auto g = oracle::rng(41);
    for (int trial = 0; trial < 10; ++trial) {
      const DenseMatrix p = oracle::random_simplex_rows(g, 12, 3, 4.0);
      const DenseMatrix n = l2_normalize_rows(p);
      double total = 0.0;
      for (std::size_t i = 0; i < 12; ++i) {
        std::vector<double> w;
        double z = 0.0;
        for (std::size_t j = 0; j < 12; ++j) {
          if (j == i) continue;
          w.push_back(std::exp(dot(n.row(i), n.row(j)) / 0.05));
          z += w.back();
        }
        for (double v : w) total -= (v / z) * std::log(v / z);
      }
      CHECK(snd_score(p) == doctest::Approx(total / 12.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("agreement_ratios") {
  SUBCASE("hand-built bank with one disagreeing neighbor") {
    // Angles 0, 5, 90, 95, 110 degrees; nearest neighbors 0-1, 2-3, 4->3.
    MemoryBank bank(BankMode::Full, 5, 2, 2);
    DenseMatrix f(5, 2);
    const double deg[] = {0.0, 5.0, 90.0, 95.0, 110.0};
    for (std::size_t r = 0; r < 5; ++r) {
      f(r, 0) = std::cos(deg[r] * M_PI / 180.0);
      f(r, 1) = std::sin(deg[r] * M_PI / 180.0);
    }
    const DenseMatrix p{{0.9, 0.1}, {0.8, 0.2}, {0.1, 0.9}, {0.3, 0.7}, {0.6, 0.4}};
    const std::vector<std::int64_t> ids{0, 1, 2, 3, 4};
    bank.update(ids, f, p);
    const std::vector<int> labels{0, 0, 1, 1, 0};
    const auto r = agreement_ratios(bank, labels, 1);
    CHECK(r.same_pred == doctest::Approx(0.8));
    CHECK(*r.correct_pred == 1.0);

    const std::vector<int> one_wrong{0, 0, 1, 0, 0};
    CHECK(*agreement_ratios(bank, one_wrong, 1).correct_pred == doctest::Approx(0.75));
    CHECK_FALSE(agreement_ratios(bank, std::nullopt, 1).correct_pred.has_value());
  }

  SUBCASE("identical predictions") {
    auto g = oracle::rng(42);
    MemoryBank bank(BankMode::Full, 20, 3, 2);
    std::vector<std::int64_t> ids(20);
    std::iota(ids.begin(), ids.end(), 0);
    DenseMatrix p(20, 2);
    for (std::size_t r = 0; r < 20; ++r) p(r, 0) = 0.7, p(r, 1) = 0.3;
    bank.update(ids, oracle::random_matrix(g, 20, 3), p);
    const std::vector<int> labels(20, 0);
    const auto r = agreement_ratios(bank, labels);
    CHECK(r.same_pred == 1.0);
    CHECK(*r.correct_pred == 1.0);
  }

  MemoryBank tiny(BankMode::Full, 3, 2, 2);
  CHECK(kind_of([&] { agreement_ratios(tiny, std::nullopt, 3); }) == ErrorKind::InsufficientData);
}

TEST_CASE("open_set_scores") {
  CHECK(std::abs(open_set_scores(67.0, 28.0, 25).hos - 39.5) <= 0.05);
  CHECK(std::abs(open_set_scores(81.8, 26.3, 25).hos - 39.8) <= 0.05);
  CHECK(open_set_scores(42.0, 42.0, 3).hos == doctest::Approx(42.0));
  CHECK(open_set_scores(0.0, 0.0, 3).hos == 0.0);
  const auto s = open_set_scores(60.0, 30.0, 2);
  CHECK(s.os == doctest::Approx(50.0));

  auto g = oracle::rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = oracle::uniform(g, 0.0, 100.0), b = oracle::uniform(g, 0.0, 100.0);
    const double hos = open_set_scores(a, b, 10).hos;
    CHECK(hos <= 0.5 * (a + b) + 1e-12);
    CHECK(hos <= 2.0 * std::min(a, b) + 1e-12);
  }
}

TEST_CASE("decision_grid") {
  MlpModel constant = init_model({2, 4, 4, 2}, 0);
  constant.params = MlpParams::zeros(constant.dims);
  constant.params.bc = {0.0, 1.0};
  const auto flat = decision_grid(constant, -1.0, 1.0, -1.0, 1.0, 7);
  CHECK(flat.labels.size() == 49);
  for (int l : flat.labels) CHECK(l == 1);
  CHECK(flat.xs.front() == -1.0);
  CHECK(flat.xs.back() == 1.0);

  SUBCASE("grid nodes agree with a direct forward pass") {
    const MlpModel m = init_model({2, 15, 15, 2}, 3);
    const auto grid = decision_grid(m, -2.0, 3.0, -1.5, 2.0, 11);
    for (std::size_t iy = 0; iy < 11; iy += 3)
      for (std::size_t ix = 0; ix < 11; ix += 2) {
        const auto p = forward(m, DenseMatrix{{grid.xs[ix], grid.ys[iy]}}).predictions;
        CHECK(grid.at(ix, iy) == predicted_labels(p)[0]);
      }
    const auto path = std::filesystem::temp_directory_path() / "aad_grid.csv";
    write_grid_csv(grid, path);
    std::ifstream in(path);
    std::string line;
    std::size_t lines = 0;
    std::getline(in, line);
    CHECK(line == "x,y,label");
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 121);
    std::filesystem::remove(path);
  }

  CHECK(kind_of([&] { decision_grid(constant, -1.0, 1.0, -1.0, 1.0, 1); }) == ErrorKind::Config);
  CHECK(kind_of([] { decision_grid(init_model({3, 2, 2, 2}, 0), -1.0, 1.0, -1.0, 1.0, 4); }) == ErrorKind::Shape);
}

TEST_CASE("report_json has the expected keys") {
  ReportBundle b;
  b.eval = EvalReport{0.75, {1.0, std::nullopt}, 1.0};
  b.snd = 1.5;
  const std::string j = report_json(b);
  for (const char* key : {"\"accuracy\"", "\"per_class\"", "\"snd\"", "\"ratios\"", "\"hos\"", "\"os\""})
    CHECK(j.find(key) != std::string::npos);
}
