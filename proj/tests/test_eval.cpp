#include <cmath>

#include "doctest.h"
#include "salve/eval.hpp"

using namespace salve;

namespace {

HeadWeights identity_head(Vector b = {0, 0}) { return {Matrix::identity(2), std::move(b)}; }

ActivationDataset dataset(Matrix X, std::vector<std::uint32_t> labels, std::size_t classes) {
  ActivationDataset d{std::move(X), std::move(labels), {}};
  for (std::size_t k = 0; k < classes; ++k) d.class_names.push_back("c" + std::to_string(k));
  return d;
}

SweepCurve curve_of(std::vector<double> alphas, std::vector<double> acc) {
  SweepCurve c;
  c.alphas = std::move(alphas);
  for (double a : acc) c.accuracy.push_back({a});
  return c;
}

ActivationDataset random_dataset(Rng& rng, std::size_t n, std::size_t m, std::size_t classes) {
  Matrix X(n, m);
  for (auto& v : X.values()) v = static_cast<float>(rng.uniform(0, 2));
  std::vector<std::uint32_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<std::uint32_t>(i % classes);
  return dataset(std::move(X), std::move(labels), classes);
}

HeadWeights random_head(Rng& rng, std::size_t classes, std::size_t m) {
  HeadWeights h{Matrix(classes, m), Vector(classes)};
  for (auto& v : h.W.values()) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto& v : h.b) v = static_cast<float>(rng.uniform(-0.5, 0.5));
  return h;
}

}  // namespace

TEST_CASE("predict examples") {
  CHECK(predict(identity_head(), Vector{2, 1}) == 0);
  CHECK(predict(identity_head({0, 5}), Vector{2, 1}) == 1);
  CHECK(predict(identity_head(), Vector{1, 1}) == 0);
  CHECK(predict(identity_head(), Vector{-3, -4}) == 0);
  CHECK_THROWS_AS(predict(identity_head(), Vector{1}), ShapeError);
}

TEST_CASE("confusion matrix examples") {
  const auto sep = dataset(Matrix::from_rows({{2, 0}, {0, 2}, {3, 1}}), {0, 1, 0}, 2);
  const auto cm = confusion_matrix(identity_head(), sep);
  CHECK(cm.at(0, 0) == 2);
  CHECK(cm.at(1, 1) == 1);
  CHECK(cm.at(0, 1) == 0);
  CHECK(cm.at(1, 0) == 0);

  const auto wrong = dataset(Matrix::from_rows({{0, 1}}), {0}, 2);
  const auto cw = confusion_matrix(identity_head(), wrong);
  CHECK(cw.at(0, 1) == 1);
  CHECK(cw.total() == 1);
}

TEST_CASE("confusion rows conserve class counts") {
  Rng rng(51);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t classes = 2 + rng.below(5);
    const auto data = random_dataset(rng, 20 + rng.below(50), 6, classes);
    const auto cm = confusion_matrix(random_head(rng, classes, 6), data);
    CHECK(cm.total() == data.size());
    const auto counts = data.class_counts();
    for (std::size_t k = 0; k < classes; ++k) CHECK(cm.row_total(k) == counts[k]);
  }
}

TEST_CASE("sweep grid") {
  const auto g = sweep_grid(10, 0.1);
  CHECK(g.size() == 101);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == doctest::Approx(10.0));
  CHECK(sweep_grid(0, 0.1).size() == 1);
  CHECK_THROWS_AS(sweep_grid(1, 0), ConfigError);
}

TEST_CASE("sweep at alpha 0 reproduces the baseline") {
  Rng rng(52);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t classes = 3;
    const auto data = random_dataset(rng, 30, 5, classes);
    const auto head = random_head(rng, classes, 5);
    Vector c(5);
    for (auto& v : c) v = static_cast<float>(rng.uniform(-1, 1));
    const auto grid = sweep_grid(2, 0.25);
    const auto curve = accuracy_sweep(head, data, c, Direction::kSuppress, grid, 1);
    CHECK(curve.accuracy.size() == grid.size());
    CHECK(curve.accuracy[0] == confusion_matrix(head, data).per_class_accuracy());
    for (const auto& dist : curve.target_predictions) {
      std::size_t sum = 0;
      for (auto v : dist) sum += v;
      CHECK(sum == curve.target_count);
    }
    for (const auto& row : curve.accuracy)
      for (double a : row) CHECK((a >= 0.0 && a <= 1.0));
  }
}

TEST_CASE("sweep steps at the known flip") {
  // Logits for x = [1, 1]: class 0 gets 2 * (1 - alpha * 0.5), class 1 gets 1.
  // Class 0 stays ahead while alpha < 1 and loses at alpha = 1 (tie goes to
  // class 0, so the flip is visible from the first point past 1).
  HeadWeights head{Matrix::from_rows({{2, 0}, {0, 1}}), {0, 0}};
  const auto data = dataset(Matrix::from_rows({{1, 1}}), {0}, 2);
  const std::vector<double> grid{0, 0.5, 0.9, 1.1, 2.0};
  const auto curve = accuracy_sweep(head, data, Vector{0.5f, 0}, Direction::kSuppress, grid, 0);
  CHECK(curve.class_curve(0) == std::vector<double>{1, 1, 1, 0, 0});
  CHECK(curve.target_predictions[3] == std::vector<std::size_t>{0, 1});

  const auto up = accuracy_sweep(head, data, Vector{0.5f, 0}, Direction::kEnhance, grid, 0);
  CHECK(up.class_curve(0) == std::vector<double>{1, 1, 1, 1, 1});
}

TEST_CASE("sweep grid validation") {
  const auto data = dataset(Matrix::from_rows({{1, 1}}), {0}, 2);
  const Vector c{1, 0};
  CHECK_THROWS_AS(accuracy_sweep(identity_head(), data, c, Direction::kSuppress, std::vector<double>{0.1, 0.2}, 0),
                  ConfigError);
  CHECK_THROWS_AS(accuracy_sweep(identity_head(), data, c, Direction::kSuppress, std::vector<double>{0, 0.2, 0.2}, 0),
                  ConfigError);
  CHECK_THROWS_AS(accuracy_sweep(identity_head(), data, c, Direction::kSuppress, std::vector<double>{0}, 2),
                  IndexError);
}

TEST_CASE("alpha_50 examples") {
  CHECK(*alpha_50(curve_of({0, 1, 2}, {1.0, 0.8, 0.4}), 0) == doctest::Approx(1.75));
  CHECK_FALSE(alpha_50(curve_of({0, 1, 2}, {1.0, 0.9, 0.6}), 0));
  CHECK(*alpha_50(curve_of({0, 1}, {0.4, 0.0}), 0) == 0.0);
  CHECK(*alpha_50(curve_of({0, 1, 2}, {1.0, 0.5, 0.0}), 0) == doctest::Approx(1.0));
}

TEST_CASE("seed robustness aggregation") {
  Rng rng(53);
  const std::size_t classes = 2;
  auto data = random_dataset(rng, 40, 4, classes);
  for (std::size_t n = 0; n < data.size(); ++n) data.X(n, data.labels[n]) += 3.0f;
  HeadWeights head{Matrix::from_rows({{1, 0, 0, 0}, {0, 1, 0, 0}}), {0, 0}};
  SaeTrainConfig cfg;
  cfg.latent_dim = 3;
  cfg.epochs = 5;
  const std::vector<double> grid = sweep_grid(2, 0.5);

  const std::vector<std::uint64_t> same{4, 4, 4};
  const auto r = seed_robustness_sweep(data.X, data, head, cfg, same, 0, grid);
  for (double s : r.stddev) CHECK(s == 0.0);
  CHECK(r.mean == r.curves[0]);

  const std::vector<std::uint64_t> two{1, 2};
  const auto r2 = seed_robustness_sweep(data.X, data, head, cfg, two, 0, grid);
  REQUIRE(r2.curves.size() == 2);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    CHECK(r2.mean[g] == doctest::Approx((r2.curves[0][g] + r2.curves[1][g]) / 2));
    CHECK(r2.stddev[g] == doctest::Approx(std::fabs(r2.curves[0][g] - r2.curves[1][g]) / std::sqrt(2.0)));
  }

  CHECK_THROWS_AS(seed_robustness_sweep(data.X, data, head, cfg, std::vector<std::uint64_t>{1}, 0, grid),
                  ConfigError);
  try {
    seed_robustness_sweep(Matrix(0, 4), data, head, cfg, two, 0, grid);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("seed 1") != std::string::npos);
  }
}

TEST_CASE("steered accuracy") {
  const auto data = dataset(Matrix::from_rows({{2, 0}, {0, 2}}), {0, 1}, 2);
  CHECK(steered_accuracy(identity_head(), data, Vector{0, 0}) == std::vector<double>{1, 1});
  CHECK(steered_accuracy(identity_head(), data, Vector{-3, 0}) == std::vector<double>{0, 1});
}
