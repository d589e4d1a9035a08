#include "salve/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace salve {

ClassLatentProfile class_conditional_means(const Matrix& Z, std::span<const std::uint32_t> labels,
                                           std::size_t num_classes) {
  if (labels.size() != Z.rows()) throw ShapeError("labels length does not match latent rows");
  std::vector<std::vector<double>> sums(num_classes, std::vector<double>(Z.cols(), 0.0));
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::size_t n = 0; n < Z.rows(); ++n) {
    const auto k = labels[n];
    if (k >= num_classes) throw DataError("label " + std::to_string(k) + " out of range");
    ++counts[k];
    auto row = Z.row(n);
    for (std::size_t j = 0; j < row.size(); ++j) sums[k][j] += row[j];
  }
  ClassLatentProfile profile{Matrix(num_classes, Z.cols()), counts};
  for (std::size_t k = 0; k < num_classes; ++k) {
    if (counts[k] == 0) throw DataError("class " + std::to_string(k) + " empty");
    for (std::size_t j = 0; j < Z.cols(); ++j) {
      profile.mu(k, j) = static_cast<float>(sums[k][j] / static_cast<double>(counts[k]));
    }
  }
  return profile;
}

std::size_t dominant_feature(const ClassLatentProfile& profile, std::size_t k) {
  if (k >= profile.num_classes()) throw IndexError("class " + std::to_string(k) + " out of range");
  if (profile.latent_dim() == 0) throw IndexError("profile has no latents");
  auto row = profile.mu.row(k);
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (std::fabs(row[j]) > std::fabs(row[best])) best = j;
  }
  return best;
}

std::vector<DominantFeature> dominant_feature_map(const ClassLatentProfile& profile) {
  std::vector<DominantFeature> out;
  for (std::size_t k = 0; k < profile.num_classes(); ++k) {
    const auto l = dominant_feature(profile, k);
    out.push_back({l, profile.mu(k, l)});
  }
  return out;
}

double dominance_ratio(const ClassLatentProfile& profile, std::size_t k) {
  const auto best = dominant_feature(profile, k);
  double runner_up = 0.0;
  for (std::size_t j = 0; j < profile.latent_dim(); ++j) {
    if (j != best) runner_up = std::max(runner_up, static_cast<double>(std::fabs(profile.mu(k, j))));
  }
  const double top = std::fabs(profile.mu(k, best));
  if (runner_up == 0.0) return top == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  return top / runner_up;
}

std::vector<std::size_t> top_activating_samples(const Matrix& Z, std::size_t latent, std::size_t k, RankBy rank) {
  if (latent >= Z.cols()) throw IndexError("latent " + std::to_string(latent) + " out of range");
  std::vector<std::size_t> idx(Z.rows());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto key = [&](std::size_t n) {
    const float v = Z(n, latent);
    return rank == RankBy::kMagnitude ? std::fabs(v) : v;
  };
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return key(a) > key(b); });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

}  // namespace salve
