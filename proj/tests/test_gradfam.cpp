#include <cmath>

#include "doctest.h"
#include "salve/gradfam.hpp"

using namespace salve;

namespace {

FeatureMapStack constant_stack(std::size_t k, std::size_t h, std::size_t w, std::vector<float> per_channel) {
  std::vector<float> data;
  for (std::size_t c = 0; c < k; ++c) data.insert(data.end(), h * w, per_channel[c]);
  return {k, h, w, std::move(data)};
}

void check_map(const Heatmap& h, std::vector<float> expected, double tol = 1e-6) {
  REQUIRE(h.data.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) CHECK(std::fabs(h.data[i] - expected[i]) <= tol);
}

FeatureMapStack random_stack(Rng& rng, std::size_t k, std::size_t h, std::size_t w) {
  std::vector<float> data(k * h * w);
  for (auto& v : data) v = static_cast<float>(rng.uniform(0, 2));
  return {k, h, w, std::move(data)};
}

const FeatureMapStack kTwoChannel{2, 2, 2, {1, 2, 3, 4, 0, 0, 0, 1}};

}  // namespace

TEST_CASE("gradfam_from_gradients examples") {
  const FeatureMapStack F1{1, 2, 2, {1, 2, 3, 4}};
  check_map(gradfam_from_gradients(F1, constant_stack(1, 2, 2, {0})), {0, 0, 0, 0});
  check_map(gradfam_from_gradients(F1, constant_stack(1, 2, 2, {1})), {0.25f, 0.5f, 0.75f, 1});
  check_map(gradfam_from_gradients(kTwoChannel, constant_stack(2, 2, 2, {0.25f, -0.25f})),
            {1.0f / 3, 2.0f / 3, 1, 1});
  CHECK_THROWS_AS(gradfam_from_gradients(F1, constant_stack(2, 2, 2, {1, 1})), ShapeError);
}

TEST_CASE("gradfam_avgpool_analytic examples") {
  check_map(gradfam_avgpool_analytic(kTwoChannel, std::vector<float>{0, 0}), {0, 0, 0, 0});
  check_map(gradfam_avgpool_analytic(kTwoChannel, std::vector<float>{1, -1}), {1.0f / 3, 2.0f / 3, 1, 1});
  const FeatureMapStack signed_map{1, 1, 3, {-2, 1, 4}};
  check_map(gradfam_avgpool_analytic(signed_map, std::vector<float>{1}), {0.5f, 0.25f, 1});
  CHECK_THROWS_AS(gradfam_avgpool_analytic(kTwoChannel, std::vector<float>{1}), ShapeError);
}

TEST_CASE("avgpool gradients equal enc_row / P") {
  const auto G = avgpool_latent_gradients(kTwoChannel, std::vector<float>{2, -4});
  for (std::size_t p = 0; p < 4; ++p) {
    CHECK(G.data[p] == doctest::Approx(0.5));
    CHECK(G.data[4 + p] == doctest::Approx(-1.0));
  }
}

TEST_CASE("analytic and gradient paths agree") {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + rng.below(5), h = 1 + rng.below(6), w = 1 + rng.below(6);
    const auto F = random_stack(rng, k, h, w);
    std::vector<float> e(k);
    for (auto& v : e) v = static_cast<float>(rng.uniform(-1, 1));
    // Oracle gradient stack built directly from the definition.
    std::vector<float> g;
    for (std::size_t c = 0; c < k; ++c) g.insert(g.end(), h * w, e[c] / static_cast<float>(h * w));
    const auto a = gradfam_avgpool_analytic(F, e);
    const auto b = gradfam_from_gradients(F, FeatureMapStack(k, h, w, g));
    check_map(a, b.data);
  }
}

TEST_CASE("heatmap is invariant to positive gradient scaling") {
  Rng rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    const auto F = random_stack(rng, 3, 4, 5);
    auto G = random_stack(rng, 3, 4, 5);
    for (auto& v : G.data) v -= 1.0f;
    const auto base = gradfam_from_gradients(F, G);
    const float s = static_cast<float>(rng.uniform(0.01, 100));
    for (auto& v : G.data) v *= s;
    check_map(gradfam_from_gradients(F, G), base.data, 1e-5);
  }
}

TEST_CASE("planted hot pixel is the heatmap argmax") {
  Rng rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t k = 4, h = 7, w = 6;
    std::vector<float> data(k * h * w, 0.0f);
    const std::size_t ch = rng.below(k), i = rng.below(h), j = rng.below(w);
    data[(ch * h + i) * w + j] = 5.0f;
    const FeatureMapStack F(k, h, w, data);
    std::vector<float> e(k, 0.0f);
    e[ch] = 1.0f;
    const auto map = gradfam_avgpool_analytic(F, e);
    const auto best = std::max_element(map.data.begin(), map.data.end()) - map.data.begin();
    CHECK(static_cast<std::size_t>(best) == i * w + j);
    CHECK(map.at(i, j) == 1.0f);
  }
}

TEST_CASE("heatmap values lie in [0, 1] with max 1") {
  Rng rng(24);
  for (int trial = 0; trial < 50; ++trial) {
    const auto F = random_stack(rng, 3, 3, 3);
    auto G = random_stack(rng, 3, 3, 3);
    const auto m = gradfam_from_gradients(F, G);
    float mx = 0.0f;
    for (float v : m.data) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
      mx = std::max(mx, v);
    }
    CHECK(mx == 1.0f);
  }
}

TEST_CASE("tv_loss examples") {
  CHECK(tv_loss(constant_stack(3, 4, 4, {1, 2, 3})) == 0.0);
  CHECK(tv_loss(FeatureMapStack(1, 2, 2, {0, 1, 0, 0})) == doctest::Approx(1.0));
  CHECK(tv_loss(FeatureMapStack(1, 2, 2, {1, 2, 3, 4})) == doctest::Approx(std::sqrt(5.0)));
  CHECK(tv_loss(FeatureMapStack(1, 1, 5, {1, 9, 2, 7, 3})) == 0.0);
  // Channels add.
  CHECK(tv_loss(FeatureMapStack(2, 2, 2, {1, 2, 3, 4, 0, 1, 0, 0})) == doctest::Approx(std::sqrt(5.0) + 1.0));
}

TEST_CASE("stack validation and bundle entries") {
  CHECK_THROWS_AS(FeatureMapStack(0, 2, 2, {}), ShapeError);
  CHECK_THROWS_AS(FeatureMapStack(1, 2, 2, {1, 2, 3}), ShapeError);

  TensorEntry three{{2, 1, 2}, {1, 2, 3, 4}};
  const auto s = stack_from_entry(three);
  CHECK(s.channels == 2);
  CHECK(s.at(1, 0, 1) == 4.0f);

  TensorEntry four{{2, 1, 1, 2}, {1, 2, 3, 4}};
  const auto second = stack_from_entry(four, 1);
  CHECK(second.channels == 1);
  CHECK(second.data == std::vector<float>{3, 4});
  CHECK_THROWS_AS(stack_from_entry(four, 2), IndexError);
  CHECK_THROWS_AS(stack_from_entry(TensorEntry{{4}, {1, 2, 3, 4}}), DataError);
}
