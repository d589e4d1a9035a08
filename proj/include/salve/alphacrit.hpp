#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "salve/bundle.hpp"

namespace salve {

enum class Exclusion {
  kNone,
  kNonpositiveLogit,      // z <= 0
  kNonpositiveRelevance,  // R <= 0 (analytical only)
  kNoZeroCrossing,        // z'(alpha) stays positive up to alpha_max (numerical only)
};

const char* exclusion_reason(Exclusion e);

struct AlphaCritSample {
  std::size_t index = 0;  // row in the dataset
  double logit = 0.0;     // bias-free z
  double relevance = 0.0; // R = sum_j |c_j| w_ij x_j
  std::optional<double> analytical;
  Exclusion analytical_exclusion = Exclusion::kNone;
  std::optional<double> numerical;
  Exclusion numerical_exclusion = Exclusion::kNone;
  // Grid interval [lo, hi] that bracketed the numerical root.
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
};

struct AlphaGrid {
  double alpha_max = 20.0;
  double step = 0.01;

  void check() const;
  std::size_t points() const;  // grid is step * g for g in [0, points)
  double at(std::size_t g) const { return step * static_cast<double>(g); }
};

struct AlphaCritSummary {
  std::string method;  // "analytical" | "numerical"
  double median = 0.0;
  double p25 = 0.0;
  double p75 = 0.0;
  double p5 = 0.0;
  double p95 = 0.0;
  std::size_t included = 0;
  std::size_t excluded = 0;
};

struct SuppressionTerms {
  std::vector<double> terms;  // 1 - alpha * |c_j| over included samples x components
  double fraction_negative = 0.0;
};

// Per-sample z / R for every sample labelled `cls`.
std::vector<AlphaCritSample> alpha_crit_analytical(const HeadWeights& head, const ActivationDataset& data,
                                                   std::span<const float> c, std::size_t cls);

// Numerical root of the exact suppressed logit for one activation vector:
// scan the grid for the first point with z'(alpha) <= 0, then locate the root
// by linear interpolation. z' is piecewise linear with kinks at 1/|c_j|, so
// the bracket is first split at the kinks it contains and interpolation runs
// on the first linear piece that changes sign.
std::optional<double> numerical_root(const HeadWeights& head, std::span<const float> x, std::span<const float> c,
                                     std::size_t cls, const AlphaGrid& grid, double* bracket_lo = nullptr,
                                     double* bracket_hi = nullptr);

// Fills both analytical and numerical fields for every sample labelled `cls`.
std::vector<AlphaCritSample> alpha_crit_numerical(const HeadWeights& head, const ActivationDataset& data,
                                                  std::span<const float> c, std::size_t cls,
                                                  const AlphaGrid& grid = {});

// Linear-interpolation percentile (q in [0, 1]) of unsorted values.
double percentile(std::vector<double> values, double q);

AlphaCritSummary summarize_alpha_crit(std::span<const AlphaCritSample> results, const std::string& method);

SuppressionTerms suppression_term_distribution(std::span<const AlphaCritSample> results, std::span<const float> c);
SuppressionTerms suppression_term_distribution(std::span<const double> alphas, std::span<const float> c);

}  // namespace salve
