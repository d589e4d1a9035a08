#pragma once

#include <span>
#include <vector>

#include "salve/bundle.hpp"

namespace salve {

// K channels of H x W maps, channel-major then row-major.
struct FeatureMapStack {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;

  FeatureMapStack() = default;
  FeatureMapStack(std::size_t k, std::size_t h, std::size_t w, std::vector<float> values);

  float at(std::size_t k, std::size_t i, std::size_t j) const { return data[(k * height + i) * width + j]; }
  std::size_t pixels() const { return height * width; }
  bool same_shape(const FeatureMapStack& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

struct Heatmap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;  // row-major, values in [0, 1]

  float at(std::size_t i, std::size_t j) const { return data[i * width + j]; }
};

// beta_k = spatial mean of G^k; map = |sum_k beta_k F^k| divided by its max.
Heatmap gradfam_from_gradients(const FeatureMapStack& F, const FeatureMapStack& G);

// For a head that average-pools F before the SAE encoder, the gradient of
// latent l w.r.t. F^k_ij is enc_row[k] / P everywhere.
FeatureMapStack avgpool_latent_gradients(const FeatureMapStack& F, std::span<const float> enc_row);
Heatmap gradfam_avgpool_analytic(const FeatureMapStack& F, std::span<const float> enc_row);

// sum_c sum_{i<H-1} sum_{j<W-1} sqrt(dx^2 + dy^2) with forward differences.
double tv_loss(const FeatureMapStack& image);

// Accepts K x H x W, or N x K x H x W together with a sample index.
FeatureMapStack stack_from_entry(const TensorEntry& entry, std::size_t sample = 0);

}  // namespace salve
