#include "salve/alphacrit.hpp"

#include <algorithm>
#include <cmath>

#include "salve/parallel.hpp"

namespace salve {

namespace {

// Precomputed per-sample terms so the grid scan is a single pass per alpha.
struct SuppressedLogit {
  std::vector<double> products;  // w_ij * x_j
  std::vector<double> weights;   // |c_j|

  SuppressedLogit(const HeadWeights& head, std::span<const float> x, std::span<const float> c, std::size_t cls) {
    if (x.size() != head.dim() || c.size() != head.dim()) throw ShapeError("alpha_crit: vector length mismatch");
    if (cls >= head.num_classes()) throw IndexError("class " + std::to_string(cls) + " out of range");
    auto w = head.W.row(cls);
    products.resize(x.size());
    weights.resize(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
      products[j] = static_cast<double>(w[j]) * x[j];
      weights[j] = std::fabs(static_cast<double>(c[j]));
    }
  }

  double operator()(double alpha) const {
    double z = 0.0;
    for (std::size_t j = 0; j < products.size(); ++j) z += products[j] * std::max(0.0, 1.0 - alpha * weights[j]);
    return z;
  }
};

std::vector<std::size_t> class_members(const ActivationDataset& data, std::size_t cls) {
  if (cls >= data.num_classes()) throw IndexError("class " + std::to_string(cls) + " out of range");
  auto members = data.indices_of(static_cast<std::uint32_t>(cls));
  if (members.empty()) throw DataError("class " + std::to_string(cls) + " has no samples");
  return members;
}

void fill_analytical(AlphaCritSample& s, const HeadWeights& head, std::span<const float> x, std::span<const float> c,
                     std::size_t cls) {
  auto w = head.W.row(cls);
  double z = 0.0;
  double r = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double p = static_cast<double>(w[j]) * x[j];
    z += p;
    r += std::fabs(static_cast<double>(c[j])) * p;
  }
  s.logit = z;
  s.relevance = r;
  if (!(z > 0.0)) {
    s.analytical_exclusion = Exclusion::kNonpositiveLogit;
  } else if (!(r > 0.0)) {
    s.analytical_exclusion = Exclusion::kNonpositiveRelevance;
  } else {
    s.analytical = z / r;
  }
}

}  // namespace

const char* exclusion_reason(Exclusion e) {
  switch (e) {
    case Exclusion::kNone: return "";
    case Exclusion::kNonpositiveLogit: return "nonpositive logit";
    case Exclusion::kNonpositiveRelevance: return "nonpositive relevance";
    case Exclusion::kNoZeroCrossing: return "no zero-crossing";
  }
  return "";
}

void AlphaGrid::check() const {
  if (!(alpha_max > 0.0) || !std::isfinite(alpha_max)) throw ConfigError("alpha_max must be positive");
  if (!(step > 0.0) || !std::isfinite(step)) throw ConfigError("alpha step must be positive");
  if (alpha_max / step > 1e8) throw ConfigError("alpha grid too fine");
}

std::size_t AlphaGrid::points() const {
  return static_cast<std::size_t>(std::floor(alpha_max / step + 1e-9)) + 1;
}

std::vector<AlphaCritSample> alpha_crit_analytical(const HeadWeights& head, const ActivationDataset& data,
                                                   std::span<const float> c, std::size_t cls) {
  if (c.size() != head.dim() || data.dim() != head.dim()) throw ShapeError("alpha_crit: dimension mismatch");
  const auto members = class_members(data, cls);
  std::vector<AlphaCritSample> out(members.size());
  for (std::size_t i = 0; i < members.size(); ++i) {
    out[i].index = members[i];
    fill_analytical(out[i], head, data.X.row(members[i]), c, cls);
  }
  return out;
}

std::optional<double> numerical_root(const HeadWeights& head, std::span<const float> x, std::span<const float> c,
                                     std::size_t cls, const AlphaGrid& grid, double* bracket_lo,
                                     double* bracket_hi) {
  grid.check();
  const SuppressedLogit f(head, x, c, cls);
  double prev_alpha = 0.0;
  double prev = f(0.0);
  if (!(prev > 0.0)) return std::nullopt;
  const std::size_t n = grid.points();
  for (std::size_t g = 1; g < n; ++g) {
    const double alpha = grid.at(g);
    const double cur = f(alpha);
    if (cur <= 0.0) {
      if (bracket_lo) *bracket_lo = prev_alpha;
      if (bracket_hi) *bracket_hi = alpha;
      std::vector<double> knots{prev_alpha};
      for (double wj : f.weights) {
        if (wj > 0.0) {
          const double kink = 1.0 / wj;
          if (kink > prev_alpha && kink < alpha) knots.push_back(kink);
        }
      }
      std::sort(knots.begin(), knots.end());
      knots.push_back(alpha);
      // Evaluating exactly at a kink leaves rounding residue where the true
      // value is zero once every positive term has clamped.
      double scale = 0.0;
      for (double p : f.products) scale += std::fabs(p);
      const double eps = 1e-12 * scale;
      double a = knots[0];
      double fa = prev;
      for (std::size_t i = 1; i < knots.size(); ++i) {
        const double b = knots[i];
        const double fb = i + 1 == knots.size() ? cur : f(b);
        if (fb <= eps) {
          if (fb >= -eps) return b;
          const double root = a + (b - a) * fa / (fa - fb);
          return std::clamp(root, a, b);
        }
        a = b;
        fa = fb;
      }
      return alpha;
    }
    prev_alpha = alpha;
    prev = cur;
  }
  return std::nullopt;
}

std::vector<AlphaCritSample> alpha_crit_numerical(const HeadWeights& head, const ActivationDataset& data,
                                                  std::span<const float> c, std::size_t cls,
                                                  const AlphaGrid& grid) {
  grid.check();
  auto out = alpha_crit_analytical(head, data, c, cls);
  parallel_for(out.size(), [&](std::size_t i) {
    auto& s = out[i];
    if (!(s.logit > 0.0)) {
      s.numerical_exclusion = Exclusion::kNonpositiveLogit;
      return;
    }
    s.numerical = numerical_root(head, data.X.row(s.index), c, cls, grid, &s.bracket_lo, &s.bracket_hi);
    if (!s.numerical) s.numerical_exclusion = Exclusion::kNoZeroCrossing;
  });
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

AlphaCritSummary summarize_alpha_crit(std::span<const AlphaCritSample> results, const std::string& method) {
  if (method != "analytical" && method != "numerical") throw ConfigError("unknown alpha_crit method '" + method + "'");
  std::vector<double> values;
  for (const auto& s : results) {
    const auto& v = method == "analytical" ? s.analytical : s.numerical;
    if (v) values.push_back(*v);
  }
  if (values.empty()) throw DataError("no samples qualified for the " + method + " alpha_crit summary");
  AlphaCritSummary sum;
  sum.method = method;
  sum.included = values.size();
  sum.excluded = results.size() - values.size();
  sum.p5 = percentile(values, 0.05);
  sum.p25 = percentile(values, 0.25);
  sum.median = percentile(values, 0.5);
  sum.p75 = percentile(values, 0.75);
  sum.p95 = percentile(values, 0.95);
  return sum;
}

SuppressionTerms suppression_term_distribution(std::span<const double> alphas, std::span<const float> c) {
  if (alphas.empty() || c.empty()) throw DataError("suppression term distribution needs at least one value");
  SuppressionTerms out;
  out.terms.reserve(alphas.size() * c.size());
  std::size_t negative = 0;
  for (double a : alphas) {
    for (float cj : c) {
      const double t = 1.0 - a * std::fabs(static_cast<double>(cj));
      out.terms.push_back(t);
      if (t < 0.0) ++negative;
    }
  }
  out.fraction_negative = static_cast<double>(negative) / static_cast<double>(out.terms.size());
  return out;
}

SuppressionTerms suppression_term_distribution(std::span<const AlphaCritSample> results, std::span<const float> c) {
  std::vector<double> alphas;
  for (const auto& s : results) {
    if (s.numerical) alphas.push_back(*s.numerical);
  }
  return suppression_term_distribution(alphas, c);
}

}  // namespace salve
