#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "salve/bundle.hpp"
#include "salve/features.hpp"
#include "salve/sae.hpp"

namespace salve {

enum class Direction { kSuppress, kEnhance };

struct EditPlan {
  std::size_t latent = 0;
  Direction direction = Direction::kSuppress;
  double alpha = 0.0;
};

// v = sum over terms of beta_l * D[:, l].
struct SteeringPlan {
  std::vector<std::pair<std::size_t, double>> terms;  // (latent, beta_l)
};

struct RomeEdit {
  Vector key;     // length M, non-zero norm
  Vector target;  // length C, desired W' key
};

// Column `latent` of the decoder, unnormalized.
Vector feature_contributions(const SaeParams& params, std::size_t latent);

// Per-column factors max(0, 1 -/+ alpha * |c_j|).
std::vector<double> edit_factors(std::span<const float> c, Direction direction, double alpha);

// Scales every column j of W by the factor for c_j; the bias is untouched.
HeadWeights apply_weight_edit(const HeadWeights& head, std::span<const float> c, const EditPlan& plan);
HeadWeights apply_weight_edit(const HeadWeights& head, const SaeParams& params, const EditPlan& plan);

// Bias-free suppressed logit sum_j w_ij * max(0, 1 - alpha |c_j|) * x_j.
double edited_logit(const HeadWeights& head, std::span<const float> x, std::span<const float> c, std::size_t cls,
                    double alpha);

// v = -beta * sign(mu[k, l]) * D[:, l], with sign(0) = +1.
Vector make_steering_vector(const SaeParams& params, const ClassLatentProfile& profile, std::size_t k,
                            std::size_t l, double beta);
Vector steering_vector(const SaeParams& params, const SteeringPlan& plan);

Vector apply_steering(std::span<const float> x, std::span<const float> v);
// Adds v to every row.
Matrix apply_steering(const Matrix& X, std::span<const float> v);

// W' = W + (v* - W k) k^T / |k|^2.
HeadWeights rome_update(const HeadWeights& head, const RomeEdit& edit);

// Key: the first sample of `target_class` the unedited head classifies
// correctly (falling back to the first sample of the class). Value: the
// bias-free logits W k with the target entry replaced by `target_value`.
RomeEdit default_rome_edit(const HeadWeights& head, const ActivationDataset& data, std::size_t target_class,
                           double target_value = -10.0);

}  // namespace salve
