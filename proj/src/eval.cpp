#include "salve/eval.hpp"

#include <cmath>
#include <numeric>

#include "salve/features.hpp"
#include "salve/parallel.hpp"

namespace salve {

std::size_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0}); }

std::size_t ConfusionMatrix::row_total(std::size_t truth) const {
  std::size_t s = 0;
  for (std::size_t p = 0; p < classes_; ++p) s += at(truth, p);
  return s;
}

std::vector<double> ConfusionMatrix::per_class_accuracy() const {
  std::vector<double> acc(classes_, 0.0);
  for (std::size_t k = 0; k < classes_; ++k) {
    const auto n = row_total(k);
    if (n > 0) acc[k] = static_cast<double>(at(k, k)) / static_cast<double>(n);
  }
  return acc;
}

std::size_t predict(const HeadWeights& head, std::span<const float> x) {
  if (x.size() != head.dim()) {
    throw ShapeError("predict: activation length " + std::to_string(x.size()) + ", head expects " +
                     std::to_string(head.dim()));
  }
  std::size_t best = 0;
  double best_logit = 0.0;
  for (std::size_t i = 0; i < head.num_classes(); ++i) {
    const double z = dot(head.W.row(i), x) + head.b[i];
    if (i == 0 || z > best_logit) {
      best = i;
      best_logit = z;
    }
  }
  return best;
}

std::vector<std::uint32_t> predict_all(const HeadWeights& head, const Matrix& X) {
  std::vector<std::uint32_t> out(X.rows());
  for (std::size_t n = 0; n < X.rows(); ++n) out[n] = static_cast<std::uint32_t>(predict(head, X.row(n)));
  return out;
}

ConfusionMatrix confusion_matrix(const HeadWeights& head, const Matrix& X, std::span<const std::uint32_t> labels,
                                 std::size_t classes) {
  if (labels.size() != X.rows()) throw ShapeError("confusion_matrix: labels length mismatch");
  ConfusionMatrix cm(classes);
  const auto preds = predict_all(head, X);
  for (std::size_t n = 0; n < preds.size(); ++n) {
    if (labels[n] >= classes || preds[n] >= classes) throw DataError("class index out of range");
    ++cm.at(labels[n], preds[n]);
  }
  return cm;
}

ConfusionMatrix confusion_matrix(const HeadWeights& head, const ActivationDataset& data) {
  return confusion_matrix(head, data.X, data.labels, data.num_classes());
}

std::vector<double> sweep_grid(double alpha_max, double step) {
  if (!(alpha_max >= 0.0) || !(step > 0.0)) throw ConfigError("sweep grid needs alpha_max >= 0 and step > 0");
  const auto n = static_cast<std::size_t>(std::floor(alpha_max / step + 1e-9)) + 1;
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = step * static_cast<double>(i);
  return g;
}

std::vector<double> SweepCurve::class_curve(std::size_t k) const {
  std::vector<double> out;
  out.reserve(accuracy.size());
  for (const auto& row : accuracy) out.push_back(row.at(k));
  return out;
}

SweepCurve accuracy_sweep(const HeadWeights& head, const ActivationDataset& data, std::span<const float> c,
                          Direction direction, std::span<const double> alphas, std::size_t target_class) {
  if (alphas.empty() || alphas.front() != 0.0) throw ConfigError("sweep grid must start at alpha = 0");
  for (std::size_t g = 1; g < alphas.size(); ++g) {
    if (!(alphas[g] > alphas[g - 1])) throw ConfigError("sweep grid must be strictly increasing");
  }
  if (target_class >= data.num_classes()) throw IndexError("target class out of range");
  SweepCurve curve;
  curve.alphas.assign(alphas.begin(), alphas.end());
  curve.target_class = target_class;
  curve.target_count = data.indices_of(static_cast<std::uint32_t>(target_class)).size();
  curve.accuracy.resize(alphas.size());
  curve.target_predictions.resize(alphas.size());
  parallel_for(alphas.size(), [&](std::size_t g) {
    const auto edited = apply_weight_edit(head, c, EditPlan{0, direction, alphas[g]});
    const auto preds = predict_all(edited, data.X);
    ConfusionMatrix cm(data.num_classes());
    for (std::size_t n = 0; n < preds.size(); ++n) ++cm.at(data.labels[n], preds[n]);
    curve.accuracy[g] = cm.per_class_accuracy();
    auto& dist = curve.target_predictions[g];
    dist.assign(data.num_classes(), 0);
    for (std::size_t p = 0; p < data.num_classes(); ++p) dist[p] = cm.at(target_class, p);
  });
  return curve;
}

std::optional<double> alpha_50(const SweepCurve& curve, std::size_t k) {
  if (curve.accuracy.empty()) return std::nullopt;
  const auto acc = curve.class_curve(k);
  if (acc[0] <= 0.5) return 0.0;
  for (std::size_t g = 1; g < acc.size(); ++g) {
    if (acc[g] <= 0.5) {
      const double a0 = curve.alphas[g - 1];
      const double a1 = curve.alphas[g];
      return a0 + (a1 - a0) * (acc[g - 1] - 0.5) / (acc[g - 1] - acc[g]);
    }
  }
  return std::nullopt;
}

std::optional<std::size_t> first_grid_index_at_or_below(const SweepCurve& curve, std::size_t k, double threshold) {
  for (std::size_t g = 0; g < curve.accuracy.size(); ++g) {
    if (curve.accuracy[g].at(k) <= threshold) return g;
  }
  return std::nullopt;
}

RobustnessResult seed_robustness_sweep(const Matrix& X_train, const ActivationDataset& data, const HeadWeights& head,
                                       const SaeTrainConfig& cfg_base, std::span<const std::uint64_t> seeds,
                                       std::size_t k, std::span<const double> alphas) {
  if (seeds.size() < 2) throw ConfigError("seed robustness needs at least two seeds");
  RobustnessResult out;
  out.alphas.assign(alphas.begin(), alphas.end());
  out.seeds.assign(seeds.begin(), seeds.end());
  out.latents.resize(seeds.size());
  out.curves.resize(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t s) {
    try {
      SaeTrainConfig cfg = cfg_base;
      cfg.seed = seeds[s];
      const auto trained = train_sae(X_train, cfg);
      const auto profile = class_conditional_means(encode(trained.params, data.X), data.labels, data.num_classes());
      const auto l = dominant_feature(profile, k);
      const auto c = feature_contributions(trained.params, l);
      out.latents[s] = l;
      out.curves[s] = accuracy_sweep(head, data, c, Direction::kSuppress, alphas, k).class_curve(k);
    } catch (const NumericalError& e) {
      throw NumericalError("seed " + std::to_string(seeds[s]) + ": " + e.what());
    } catch (const Error& e) {
      throw DataError("seed " + std::to_string(seeds[s]) + ": " + e.what());
    }
  });
  const std::size_t G = alphas.size();
  const double n = static_cast<double>(seeds.size());
  out.mean.assign(G, 0.0);
  out.stddev.assign(G, 0.0);
  for (std::size_t g = 0; g < G; ++g) {
    // Offsets from the first curve keep identical curves exact.
    const double base = out.curves[0][g];
    double offset = 0.0;
    for (const auto& c : out.curves) offset += c[g] - base;
    const double mean = base + offset / n;
    double ss = 0.0;
    for (const auto& c : out.curves) ss += (c[g] - mean) * (c[g] - mean);
    out.mean[g] = mean;
    out.stddev[g] = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

std::vector<double> steered_accuracy(const HeadWeights& head, const ActivationDataset& data,
                                     std::span<const float> v) {
  return confusion_matrix(head, apply_steering(data.X, v), data.labels, data.num_classes()).per_class_accuracy();
}

}  // namespace salve
