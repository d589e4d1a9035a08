#include "salve/gradfam.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace salve {

FeatureMapStack::FeatureMapStack(std::size_t k, std::size_t h, std::size_t w, std::vector<float> values)
    : channels(k), height(h), width(w), data(std::move(values)) {
  if (k < 1) throw ShapeError("feature map stack needs at least one channel");
  if (data.size() != k * h * w) throw ShapeError("feature map data length does not match K x H x W");
}

Heatmap gradfam_from_gradients(const FeatureMapStack& F, const FeatureMapStack& G) {
  if (!F.same_shape(G)) throw ShapeError("Grad-FAM: feature maps and gradients differ in shape");
  const std::size_t P = F.pixels();
  std::vector<double> raw(P, 0.0);
  for (std::size_t k = 0; k < F.channels; ++k) {
    double beta = 0.0;
    for (std::size_t p = 0; p < P; ++p) beta += G.data[k * P + p];
    beta /= static_cast<double>(P);
    if (beta == 0.0) continue;
    for (std::size_t p = 0; p < P; ++p) raw[p] += beta * F.data[k * P + p];
  }
  double mx = 0.0;
  for (auto& v : raw) {
    v = std::fabs(v);
    mx = std::max(mx, v);
  }
  Heatmap h{F.height, F.width, std::vector<float>(P, 0.0f)};
  if (mx > 0.0) {
    for (std::size_t p = 0; p < P; ++p) h.data[p] = static_cast<float>(raw[p] / mx);
  }
  return h;
}

FeatureMapStack avgpool_latent_gradients(const FeatureMapStack& F, std::span<const float> enc_row) {
  if (enc_row.size() != F.channels) {
    throw ShapeError("encoder row has " + std::to_string(enc_row.size()) + " entries, stack has " +
                     std::to_string(F.channels) + " channels");
  }
  const std::size_t P = F.pixels();
  std::vector<float> g(F.data.size());
  for (std::size_t k = 0; k < F.channels; ++k) {
    const auto v = static_cast<float>(static_cast<double>(enc_row[k]) / static_cast<double>(P));
    std::fill(g.begin() + static_cast<std::ptrdiff_t>(k * P), g.begin() + static_cast<std::ptrdiff_t>((k + 1) * P), v);
  }
  return FeatureMapStack(F.channels, F.height, F.width, std::move(g));
}

Heatmap gradfam_avgpool_analytic(const FeatureMapStack& F, std::span<const float> enc_row) {
  return gradfam_from_gradients(F, avgpool_latent_gradients(F, enc_row));
}

double tv_loss(const FeatureMapStack& image) {
  if (image.height < 2 || image.width < 2) return 0.0;
  double total = 0.0;
  for (std::size_t c = 0; c < image.channels; ++c) {
    for (std::size_t i = 0; i + 1 < image.height; ++i) {
      for (std::size_t j = 0; j + 1 < image.width; ++j) {
        const double x = image.at(c, i, j);
        const double dv = image.at(c, i + 1, j) - x;
        const double dh = image.at(c, i, j + 1) - x;
        total += std::sqrt(dv * dv + dh * dh);
      }
    }
  }
  return total;
}

FeatureMapStack stack_from_entry(const TensorEntry& entry, std::size_t sample) {
  if (entry.shape.size() == 3) {
    if (sample != 0) throw IndexError("sample index given for a single-sample feature map stack");
    return FeatureMapStack(entry.shape[0], entry.shape[1], entry.shape[2], entry.data);
  }
  if (entry.shape.size() == 4) {
    if (sample >= entry.shape[0]) throw IndexError("sample " + std::to_string(sample) + " out of range");
    const std::size_t per = entry.shape[1] * entry.shape[2] * entry.shape[3];
    const auto begin = entry.data.begin() + static_cast<std::ptrdiff_t>(sample * per);
    return FeatureMapStack(entry.shape[1], entry.shape[2], entry.shape[3],
                           std::vector<float>(begin, begin + static_cast<std::ptrdiff_t>(per)));
  }
  throw DataError("feature map entries must be 3-D (K x H x W) or 4-D (N x K x H x W)");
}

}  // namespace salve
