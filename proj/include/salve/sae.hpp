#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "salve/bundle.hpp"
#include "salve/tensor.hpp"

namespace salve {

// Linear sparse autoencoder. Column l of dec_w is the activation-space
// direction of latent l.
struct SaeParams {
  Matrix enc_w;  // d x M
  Vector enc_b;  // d
  Matrix dec_w;  // M x d
  Vector dec_b;  // M

  std::size_t latent_dim() const { return enc_w.rows(); }
  std::size_t input_dim() const { return enc_w.cols(); }
  void check() const;

  friend bool operator==(const SaeParams&, const SaeParams&) = default;
};

struct SaeTrainConfig {
  std::size_t latent_dim = 32;
  double lambda1 = 1e-3;
  double lr = 1e-3;
  std::size_t epochs = 1000;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double lr_decay_factor = 0.8;
  std::size_t lr_decay_every = 200;  // 0 disables the step schedule

  void check() const;
  double lr_at_epoch(std::size_t epoch) const;
};

struct SaeLoss {
  double total = 0.0;
  double recon = 0.0;
  double l1 = 0.0;
};

struct EpochRecord {
  double total = 0.0;
  double recon = 0.0;
  double l1 = 0.0;
  double lr = 0.0;
};

using TrainTrace = std::vector<EpochRecord>;

struct SaeGradients {
  Matrix enc_w;
  Matrix enc_b;  // 1 x d
  Matrix dec_w;
  Matrix dec_b;  // 1 x M
};

struct SaeTrainResult {
  SaeParams params;
  TrainTrace trace;
};

// Z = X E^T + b_enc (no nonlinearity).
Matrix encode(const SaeParams& params, const Matrix& X);
// A_hat = Z D^T + b_dec.
Matrix decode(const SaeParams& params, const Matrix& Z);

// Per-sample mean convention: recon = sum((A - A_hat)^2) / N,
// l1 = sum(|Z|) / N, total = recon + lambda1 * l1.
SaeLoss sae_loss(const Matrix& A, const Matrix& A_hat, const Matrix& Z, double lambda1);

// Closed-form gradients of sae_loss on batch X; the l1 subgradient at 0 is 0.
SaeGradients sae_gradients(const SaeParams& params, const Matrix& X, double lambda1);

// Xavier-uniform weights, zero biases, drawn from Rng(cfg.seed).
SaeParams init_sae(std::size_t input_dim, const SaeTrainConfig& cfg);

// Deterministic given (X, cfg).
SaeTrainResult train_sae(const Matrix& X, const SaeTrainConfig& cfg);

// Bundle entries "enc_w", "enc_b", "dec_w", "dec_b"; config goes in the manifest.
TensorBundle sae_to_bundle(const SaeParams& params, const SaeTrainConfig& cfg);
SaeParams sae_from_bundle(const TensorBundle& bundle);

}  // namespace salve
