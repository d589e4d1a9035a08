#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "salve/bundle.hpp"
#include "salve/edits.hpp"
#include "salve/sae.hpp"

namespace salve {

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = 0) : classes_(classes), counts_(classes * classes, 0) {}

  std::size_t classes() const { return classes_; }
  std::size_t& at(std::size_t truth, std::size_t pred) { return counts_[truth * classes_ + pred]; }
  std::size_t at(std::size_t truth, std::size_t pred) const { return counts_[truth * classes_ + pred]; }
  std::size_t total() const;
  std::size_t row_total(std::size_t truth) const;
  // Diagonal over row total; 0 for classes without samples.
  std::vector<double> per_class_accuracy() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t classes_;
  std::vector<std::size_t> counts_;
};

// argmax_i (W x + b)_i, lowest index on ties.
std::size_t predict(const HeadWeights& head, std::span<const float> x);
std::vector<std::uint32_t> predict_all(const HeadWeights& head, const Matrix& X);

ConfusionMatrix confusion_matrix(const HeadWeights& head, const ActivationDataset& data);
ConfusionMatrix confusion_matrix(const HeadWeights& head, const Matrix& X, std::span<const std::uint32_t> labels,
                                 std::size_t classes);

// 0, step, 2 step, ... up to alpha_max (inclusive within rounding).
std::vector<double> sweep_grid(double alpha_max, double step);

struct SweepCurve {
  std::vector<double> alphas;
  std::size_t target_class = 0;
  std::size_t target_count = 0;
  std::vector<std::vector<double>> accuracy;               // [grid][class]
  std::vector<std::vector<std::size_t>> target_predictions;  // [grid][predicted class], target samples only

  std::vector<double> class_curve(std::size_t k) const;
};

SweepCurve accuracy_sweep(const HeadWeights& head, const ActivationDataset& data, std::span<const float> c,
                          Direction direction, std::span<const double> alphas, std::size_t target_class);

// Linear interpolation at the first interval where accuracy of class k goes
// from > 0.5 to <= 0.5; 0 when already <= 0.5 at alpha = 0.
std::optional<double> alpha_50(const SweepCurve& curve, std::size_t k);

// First grid index at which class k accuracy is <= threshold.
std::optional<std::size_t> first_grid_index_at_or_below(const SweepCurve& curve, std::size_t k, double threshold);

struct RobustnessResult {
  std::vector<double> alphas;
  std::vector<std::uint64_t> seeds;
  std::vector<std::size_t> latents;             // dominant latent per seed
  std::vector<std::vector<double>> curves;      // [seed][grid] target-class accuracy
  std::vector<double> mean;
  std::vector<double> stddev;                   // sample standard deviation (n - 1)
};

// For each seed: train an SAE on X_train, pick the dominant latent for class k
// on the evaluation set and sweep suppression over `alphas`.
RobustnessResult seed_robustness_sweep(const Matrix& X_train, const ActivationDataset& data, const HeadWeights& head,
                                       const SaeTrainConfig& cfg_base, std::span<const std::uint64_t> seeds,
                                       std::size_t k, std::span<const double> alphas);

// Per-class accuracy after adding v to every activation row.
std::vector<double> steered_accuracy(const HeadWeights& head, const ActivationDataset& data,
                                     std::span<const float> v);

}  // namespace salve
