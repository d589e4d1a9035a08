#include "salve/edits.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace salve {

namespace {

void require_len(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw ShapeError(std::string(what) + ": length " + std::to_string(got) + ", expected " + std::to_string(want));
  }
}

}  // namespace

Vector feature_contributions(const SaeParams& params, std::size_t latent) {
  if (latent >= params.latent_dim()) {
    throw IndexError("latent " + std::to_string(latent) + " out of range for d=" +
                     std::to_string(params.latent_dim()));
  }
  return params.dec_w.column(latent);
}

std::vector<double> edit_factors(std::span<const float> c, Direction direction, double alpha) {
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be non-negative");
  const double sign = direction == Direction::kSuppress ? -1.0 : 1.0;
  std::vector<double> f(c.size());
  for (std::size_t j = 0; j < c.size(); ++j) {
    f[j] = std::max(0.0, 1.0 + sign * alpha * std::fabs(static_cast<double>(c[j])));
  }
  return f;
}

HeadWeights apply_weight_edit(const HeadWeights& head, std::span<const float> c, const EditPlan& plan) {
  require_len(c.size(), head.dim(), "apply_weight_edit contributions");
  const auto f = edit_factors(c, plan.direction, plan.alpha);
  HeadWeights out = head;
  for (std::size_t i = 0; i < out.W.rows(); ++i) {
    auto row = out.W.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = static_cast<float>(row[j] * f[j]);
  }
  return out;
}

HeadWeights apply_weight_edit(const HeadWeights& head, const SaeParams& params, const EditPlan& plan) {
  return apply_weight_edit(head, feature_contributions(params, plan.latent), plan);
}

double edited_logit(const HeadWeights& head, std::span<const float> x, std::span<const float> c, std::size_t cls,
                    double alpha) {
  require_len(x.size(), head.dim(), "edited_logit activations");
  require_len(c.size(), head.dim(), "edited_logit contributions");
  if (cls >= head.num_classes()) throw IndexError("class " + std::to_string(cls) + " out of range");
  auto w = head.W.row(cls);
  double z = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double f = std::max(0.0, 1.0 - alpha * std::fabs(static_cast<double>(c[j])));
    z += static_cast<double>(w[j]) * f * x[j];
  }
  return z;
}

Vector make_steering_vector(const SaeParams& params, const ClassLatentProfile& profile, std::size_t k,
                            std::size_t l, double beta) {
  if (k >= profile.num_classes()) throw IndexError("class " + std::to_string(k) + " out of range");
  if (l >= profile.latent_dim()) throw IndexError("latent " + std::to_string(l) + " out of range");
  const double sign = profile.mu(k, l) < 0.0f ? -1.0 : 1.0;
  return steering_vector(params, SteeringPlan{{{l, -beta * sign}}});
}

Vector steering_vector(const SaeParams& params, const SteeringPlan& plan) {
  std::vector<double> acc(params.input_dim(), 0.0);
  std::vector<std::size_t> seen;
  for (const auto& [l, beta] : plan.terms) {
    if (std::find(seen.begin(), seen.end(), l) != seen.end()) {
      throw ConfigError("steering plan repeats latent " + std::to_string(l));
    }
    seen.push_back(l);
    const auto col = feature_contributions(params, l);
    for (std::size_t j = 0; j < col.size(); ++j) acc[j] += beta * col[j];
  }
  return Vector(acc.begin(), acc.end());
}

Vector apply_steering(std::span<const float> x, std::span<const float> v) {
  require_len(v.size(), x.size(), "apply_steering");
  Vector out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = x[j] + v[j];
  return out;
}

Matrix apply_steering(const Matrix& X, std::span<const float> v) {
  Matrix out = X;
  add_row_broadcast(out, v);
  return out;
}

HeadWeights rome_update(const HeadWeights& head, const RomeEdit& edit) {
  require_len(edit.key.size(), head.dim(), "rome_update key");
  require_len(edit.target.size(), head.num_classes(), "rome_update target");
  const double norm2 = dot(edit.key, edit.key);
  if (!(norm2 > 0.0)) throw DataError("rome_update: degenerate key with zero norm");
  HeadWeights out = head;
  for (std::size_t i = 0; i < head.num_classes(); ++i) {
    const double residual = edit.target[i] - dot(head.W.row(i), edit.key);
    const double scale = residual / norm2;
    auto row = out.W.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = static_cast<float>(row[j] + scale * edit.key[j]);
  }
  return out;
}

RomeEdit default_rome_edit(const HeadWeights& head, const ActivationDataset& data, std::size_t target_class,
                           double target_value) {
  if (target_class >= head.num_classes()) throw IndexError("class " + std::to_string(target_class) + " out of range");
  const auto members = data.indices_of(static_cast<std::uint32_t>(target_class));
  if (members.empty()) throw DataError("class " + std::to_string(target_class) + " has no samples");
  std::size_t chosen = members.front();
  for (auto n : members) {
    const auto x = data.X.row(n);
    std::size_t best = 0;
    double best_logit = -INFINITY;
    for (std::size_t i = 0; i < head.num_classes(); ++i) {
      const double z = dot(head.W.row(i), x) + head.b[i];
      if (z > best_logit) {
        best_logit = z;
        best = i;
      }
    }
    if (best == target_class) {
      chosen = n;
      break;
    }
  }
  RomeEdit edit;
  const auto key = data.X.row(chosen);
  edit.key.assign(key.begin(), key.end());
  edit.target = matvec(head.W, edit.key);
  edit.target[target_class] = static_cast<float>(target_value);
  return edit;
}

}  // namespace salve
