#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "salve/tensor.hpp"

namespace salve {

struct ClassLatentProfile {
  Matrix mu;                        // C x d class-conditional mean latents
  std::vector<std::size_t> counts;  // samples per class, each >= 1

  std::size_t num_classes() const { return mu.rows(); }
  std::size_t latent_dim() const { return mu.cols(); }
};

struct DominantFeature {
  std::size_t latent = 0;
  float mean_activation = 0.0f;  // signed mu[k, latent]
};

// Throws DataError naming the first empty class.
ClassLatentProfile class_conditional_means(const Matrix& Z, std::span<const std::uint32_t> labels,
                                           std::size_t num_classes);

// argmax_j |mu[k, j]|, lowest index on ties.
std::size_t dominant_feature(const ClassLatentProfile& profile, std::size_t k);
std::vector<DominantFeature> dominant_feature_map(const ClassLatentProfile& profile);

// Ratio |mu[k, l_k]| / second-largest |mu[k, j]| (infinity when the
// runner-up is zero).
double dominance_ratio(const ClassLatentProfile& profile, std::size_t k);

enum class RankBy { kValue, kMagnitude };

// Indices of the k largest entries of column `latent`, descending, ties to the
// lowest index; k is clipped to the number of rows.
std::vector<std::size_t> top_activating_samples(const Matrix& Z, std::size_t latent, std::size_t k,
                                                RankBy rank = RankBy::kValue);

}  // namespace salve
