#include "salve/sae.hpp"

#include <cmath>
#include <numeric>

#include "json.hpp"

namespace salve {

namespace {

Matrix random_uniform(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  for (auto& v : m.values()) v = static_cast<float>(rng.uniform(-bound, bound));
  return m;
}

double xavier_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Matrix gather_rows(const Matrix& X, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), X.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto src = X.row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Vector row_to_vector(const Matrix& m) { return m.storage(); }

}  // namespace

void SaeParams::check() const {
  const std::size_t d = enc_w.rows();
  const std::size_t m = enc_w.cols();
  if (dec_w.rows() != m || dec_w.cols() != d || enc_b.size() != d || dec_b.size() != m) {
    throw ShapeError("inconsistent SAE parameter shapes: enc_w " + std::to_string(d) + "x" + std::to_string(m) +
                     ", dec_w " + std::to_string(dec_w.rows()) + "x" + std::to_string(dec_w.cols()));
  }
}

void SaeTrainConfig::check() const {
  if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  if (!(lambda1 >= 0.0)) throw ConfigError("lambda1 must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (!(lr_decay_factor > 0.0)) throw ConfigError("lr_decay_factor must be > 0");
}

double SaeTrainConfig::lr_at_epoch(std::size_t epoch) const {
  if (lr_decay_every == 0) return lr;
  return lr * std::pow(lr_decay_factor, static_cast<double>(epoch / lr_decay_every));
}

Matrix encode(const SaeParams& params, const Matrix& X) {
  if (X.cols() != params.input_dim()) {
    throw ShapeError("encode: input has " + std::to_string(X.cols()) + " columns, SAE expects " +
                     std::to_string(params.input_dim()));
  }
  Matrix Z = matmul_nt(X, params.enc_w);
  add_row_broadcast(Z, params.enc_b);
  return Z;
}

Matrix decode(const SaeParams& params, const Matrix& Z) {
  if (Z.cols() != params.latent_dim()) {
    throw ShapeError("decode: latent has " + std::to_string(Z.cols()) + " columns, SAE expects " +
                     std::to_string(params.latent_dim()));
  }
  Matrix A_hat = matmul_nt(Z, params.dec_w);
  add_row_broadcast(A_hat, params.dec_b);
  return A_hat;
}

SaeLoss sae_loss(const Matrix& A, const Matrix& A_hat, const Matrix& Z, double lambda1) {
  if (A.rows() != A_hat.rows() || A.cols() != A_hat.cols()) throw ShapeError("sae_loss: A and A_hat differ in shape");
  if (Z.rows() != A.rows()) throw ShapeError("sae_loss: Z rows differ from A rows");
  const double n = static_cast<double>(A.rows());
  if (n == 0) return {};
  double sq = 0.0;
  auto a = A.values();
  auto ah = A_hat.values();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double r = static_cast<double>(a[i]) - ah[i];
    sq += r * r;
  }
  double abs_sum = 0.0;
  for (float z : Z.values()) abs_sum += std::fabs(static_cast<double>(z));
  SaeLoss loss;
  loss.recon = sq / n;
  loss.l1 = abs_sum / n;
  loss.total = loss.recon + lambda1 * loss.l1;
  return loss;
}

SaeGradients sae_gradients(const SaeParams& params, const Matrix& X, double lambda1) {
  const Matrix Z = encode(params, X);
  Matrix residual = decode(params, Z);
  const double scale = 2.0 / static_cast<double>(X.rows());
  {
    auto r = residual.values();
    auto x = X.values();
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = static_cast<float>(scale * (static_cast<double>(r[i]) - x[i]));
  }
  // residual now holds dL/dA_hat.
  SaeGradients g;
  g.dec_w = matmul_tn(residual, Z);
  g.dec_b = Matrix::row_vector(column_sums(residual));
  Matrix dZ = matmul(residual, params.dec_w);
  const double l1_scale = lambda1 / static_cast<double>(X.rows());
  if (l1_scale != 0.0) {
    auto dz = dZ.values();
    auto z = Z.values();
    for (std::size_t i = 0; i < dz.size(); ++i) {
      const double s = z[i] > 0.0f ? 1.0 : (z[i] < 0.0f ? -1.0 : 0.0);
      dz[i] = static_cast<float>(dz[i] + l1_scale * s);
    }
  }
  g.enc_w = matmul_tn(dZ, X);
  g.enc_b = Matrix::row_vector(column_sums(dZ));
  return g;
}

SaeParams init_sae(std::size_t input_dim, const SaeTrainConfig& cfg) {
  cfg.check();
  Rng rng(cfg.seed);
  const std::size_t d = cfg.latent_dim;
  const double bound = xavier_bound(input_dim, d);
  SaeParams p;
  p.enc_w = random_uniform(d, input_dim, bound, rng);
  p.dec_w = random_uniform(input_dim, d, bound, rng);
  p.enc_b = Vector(d, 0.0f);
  p.dec_b = Vector(input_dim, 0.0f);
  return p;
}

SaeTrainResult train_sae(const Matrix& X, const SaeTrainConfig& cfg) {
  cfg.check();
  if (X.rows() == 0) throw DataError("train_sae: no training samples");
  SaeParams params = init_sae(X.cols(), cfg);
  // Shuffling draws come from a stream distinct from initialization.
  Rng shuffle_rng(cfg.seed ^ 0xA5A5A5A5DEADBEEFULL);

  Matrix enc_b = Matrix::row_vector(params.enc_b);
  Matrix dec_b = Matrix::row_vector(params.dec_b);
  AdamState s_enc_w = AdamState::zeros_like(params.enc_w, cfg.lr);
  AdamState s_enc_b = AdamState::zeros_like(enc_b, cfg.lr);
  AdamState s_dec_w = AdamState::zeros_like(params.dec_w, cfg.lr);
  AdamState s_dec_b = AdamState::zeros_like(dec_b, cfg.lr);

  std::vector<std::size_t> order(X.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainTrace trace;
  trace.reserve(cfg.epochs);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at_epoch(epoch);
    s_enc_w.lr = s_enc_b.lr = s_dec_w.lr = s_dec_b.lr = lr;
    shuffle_rng.shuffle(std::span<std::size_t>(order));

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const Matrix batch = gather_rows(X, std::span<const std::size_t>(order).subspan(start, stop - start));
      params.enc_b = enc_b.storage();
      params.dec_b = dec_b.storage();
      const SaeGradients g = sae_gradients(params, batch, cfg.lambda1);

      auto r1 = adam_update(std::move(params.enc_w), g.enc_w, std::move(s_enc_w));
      params.enc_w = std::move(r1.param);
      s_enc_w = std::move(r1.state);
      auto r2 = adam_update(std::move(enc_b), g.enc_b, std::move(s_enc_b));
      enc_b = std::move(r2.param);
      s_enc_b = std::move(r2.state);
      auto r3 = adam_update(std::move(params.dec_w), g.dec_w, std::move(s_dec_w));
      params.dec_w = std::move(r3.param);
      s_dec_w = std::move(r3.state);
      auto r4 = adam_update(std::move(dec_b), g.dec_b, std::move(s_dec_b));
      dec_b = std::move(r4.param);
      s_dec_b = std::move(r4.state);
    }

    params.enc_b = row_to_vector(enc_b);
    params.dec_b = row_to_vector(dec_b);
    const Matrix Z = encode(params, X);
    const SaeLoss loss = sae_loss(X, decode(params, Z), Z, cfg.lambda1);
    if (!std::isfinite(loss.total)) {
      throw NumericalError("SAE training diverged at epoch " + std::to_string(epoch));
    }
    trace.push_back({loss.total, loss.recon, loss.l1, lr});
  }
  params.enc_b = row_to_vector(enc_b);
  params.dec_b = row_to_vector(dec_b);
  return {std::move(params), std::move(trace)};
}

TensorBundle sae_to_bundle(const SaeParams& params, const SaeTrainConfig& cfg) {
  params.check();
  TensorBundle b;
  b.set("enc_w", params.enc_w);
  b.set("enc_b", std::span<const float>(params.enc_b));
  b.set("dec_w", params.dec_w);
  b.set("dec_b", std::span<const float>(params.dec_b));
  nlohmann::json manifest = {
      {"kind", "sae"},
      {"config",
       {{"latent_dim", cfg.latent_dim},
        {"lambda1", cfg.lambda1},
        {"lr", cfg.lr},
        {"epochs", cfg.epochs},
        {"batch_size", cfg.batch_size},
        {"seed", cfg.seed},
        {"lr_decay_factor", cfg.lr_decay_factor},
        {"lr_decay_every", cfg.lr_decay_every}}}};
  b.manifest = manifest.dump();
  return b;
}

SaeParams sae_from_bundle(const TensorBundle& bundle) {
  bundle.validate();
  SaeParams p{entry_as_matrix(bundle.at("enc_w"), "enc_w"), entry_as_vector(bundle.at("enc_b"), "enc_b"),
              entry_as_matrix(bundle.at("dec_w"), "dec_w"), entry_as_vector(bundle.at("dec_b"), "dec_b")};
  try {
    p.check();
  } catch (const ShapeError& e) {
    throw DataError(e.what());
  }
  return p;
}

}  // namespace salve
