#include "salve/synthbench.hpp"

#include <cmath>

#include "json.hpp"

namespace salve {

namespace {

ActivationDataset make_split(const SynthConfig& cfg, std::size_t per_class, Rng& rng,
                             const std::vector<std::string>& names) {
  const std::size_t n = per_class * cfg.classes;
  ActivationDataset ds;
  ds.X = Matrix(n, cfg.dim);
  ds.labels.reserve(n);
  ds.class_names = names;
  std::size_t row = 0;
  for (std::size_t k = 0; k < cfg.classes; ++k) {
    for (std::size_t s = 0; s < per_class; ++s, ++row) {
      auto x = ds.X.row(row);
      for (auto& v : x) {
        const double e = rng.normal();
        v = static_cast<float>(cfg.noise * (cfg.nonnegative ? std::fabs(e) : e));
      }
      auto add_concept = [&](std::size_t q) {
        for (std::size_t j = q * cfg.support_size; j < (q + 1) * cfg.support_size; ++j) {
          x[j] = static_cast<float>(x[j] + cfg.strength);
        }
      };
      add_concept(k);
      for (std::size_t q = cfg.classes; q < cfg.concepts; ++q) {
        if (rng.uniform() < 0.5) add_concept(q);
      }
      ds.labels.push_back(static_cast<std::uint32_t>(k));
    }
  }
  return ds;
}

Matrix logits(const HeadWeights& head, const Matrix& X) {
  Matrix out = matmul_nt(X, head.W);
  add_row_broadcast(out, head.b);
  return out;
}

// In-place row softmax, returning the mean negative log-likelihood of labels.
double softmax_rows(Matrix& z, std::span<const std::uint32_t> labels) {
  double nll = 0.0;
  for (std::size_t n = 0; n < z.rows(); ++n) {
    auto row = z.row(n);
    double mx = row[0];
    for (float v : row) mx = std::max(mx, static_cast<double>(v));
    double sum = 0.0;
    for (float v : row) sum += std::exp(v - mx);
    nll += -(row[labels[n]] - mx - std::log(sum));
    for (auto& v : row) v = static_cast<float>(std::exp(v - mx) / sum);
  }
  return z.rows() == 0 ? 0.0 : nll / static_cast<double>(z.rows());
}

}  // namespace

void SynthConfig::check() const {
  if (classes < 2) throw ConfigError("synthetic benchmark needs at least 2 classes");
  if (dim < classes) throw ConfigError("activation dim must be >= number of classes");
  if (concepts < classes) throw ConfigError("need at least one concept per class");
  if (support_size < 1) throw ConfigError("support_size must be >= 1");
  if (concepts * support_size > dim) {
    throw ConfigError("dim " + std::to_string(dim) + " too small for " + std::to_string(concepts) +
                      " disjoint supports of size " + std::to_string(support_size));
  }
  if (!(strength > 0.0)) throw ConfigError("concept strength must be > 0");
  if (!(noise >= 0.0)) throw ConfigError("noise scale must be >= 0");
}

SynthDataset generate_synthetic_dataset(const SynthConfig& cfg) {
  cfg.check();
  std::vector<std::string> names;
  for (std::size_t k = 0; k < cfg.classes; ++k) names.push_back("class_" + std::to_string(k));
  Rng rng(cfg.seed);
  SynthDataset out;
  out.train = make_split(cfg, cfg.train_per_class, rng, names);
  out.test = make_split(cfg, cfg.test_per_class, rng, names);
  return out;
}

double cross_entropy(const HeadWeights& head, const ActivationDataset& data) {
  Matrix z = logits(head, data.X);
  return softmax_rows(z, data.labels);
}

HeadWeights train_linear_head(const ActivationDataset& train, const HeadTrainConfig& cfg) {
  train.check();
  if (train.size() == 0) throw DataError("cannot train a head on an empty dataset");
  if (train.num_classes() < 2) throw DataError("cannot train a head with fewer than 2 classes");
  const std::size_t c = train.num_classes();
  HeadWeights head{Matrix(c, train.dim()), Vector(c, 0.0f)};
  const double inv_n = 1.0 / static_cast<double>(train.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Matrix g = logits(head, train.X);
    softmax_rows(g, train.labels);
    for (std::size_t n = 0; n < g.rows(); ++n) {
      auto row = g.row(n);
      row[train.labels[n]] -= 1.0f;
      for (auto& v : row) v = static_cast<float>(v * inv_n);
    }
    const Matrix dW = matmul_tn(g, train.X);
    const Vector db = column_sums(g);
    auto w = head.W.values();
    auto dw = dW.values();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<float>(w[i] - cfg.lr * dw[i]);
    for (std::size_t i = 0; i < c; ++i) head.b[i] = static_cast<float>(head.b[i] - cfg.lr * db[i]);
  }
  if (!head.W.all_finite()) throw NumericalError("head training diverged");
  return head;
}

TensorBundle synth_bundle(const SynthDataset& data, const HeadWeights& head, const SynthConfig& cfg) {
  TensorBundle b;
  put_dataset(b, data.test);
  put_head(b, head);
  put_dataset(b, data.train, "train_activations", "train_labels");
  nlohmann::json manifest = {
      {"class_names", data.test.class_names},
      {"model", "synthetic"},
      {"source_layer", "synthetic_penultimate"},
      {"synth_config",
       {{"classes", cfg.classes},
        {"dim", cfg.dim},
        {"concepts", cfg.concepts},
        {"support_size", cfg.support_size},
        {"train_per_class", cfg.train_per_class},
        {"test_per_class", cfg.test_per_class},
        {"strength", cfg.strength},
        {"noise", cfg.noise},
        {"nonnegative", cfg.nonnegative},
        {"seed", cfg.seed}}}};
  b.manifest = manifest.dump();
  return b;
}

}  // namespace salve
