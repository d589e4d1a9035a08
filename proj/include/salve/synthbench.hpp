#pragma once

#include <cstdint>

#include "salve/bundle.hpp"

namespace salve {

// Class-structured activations: concept q occupies the contiguous block
// [q * support_size, (q + 1) * support_size) with value `strength`. Class k
// carries concept k; concepts beyond `classes` are class-independent
// distractors present in each sample with probability 1/2.
struct SynthConfig {
  std::size_t classes = 10;
  std::size_t dim = 64;
  std::size_t concepts = 10;
  std::size_t support_size = 4;
  std::size_t train_per_class = 200;
  std::size_t test_per_class = 50;
  double strength = 3.0;
  double noise = 0.3;
  bool nonnegative = true;
  std::uint64_t seed = 7;

  void check() const;
};

struct SynthDataset {
  ActivationDataset train;
  ActivationDataset test;
};

SynthDataset generate_synthetic_dataset(const SynthConfig& cfg);

struct HeadTrainConfig {
  double lr = 0.05;
  std::size_t epochs = 500;
  // Initialization is all-zero and training is full-batch, so the seed only
  // participates through the data; kept so callers can record provenance.
  std::uint64_t seed = 0;
};

// Mean softmax cross-entropy of the affine head over the dataset.
double cross_entropy(const HeadWeights& head, const ActivationDataset& data);

// Full-batch gradient descent on mean softmax cross-entropy from a zero head.
HeadWeights train_linear_head(const ActivationDataset& train, const HeadTrainConfig& cfg = {});

// Test split under "activations"/"labels", train split under
// "train_activations"/"train_labels", the head, and class names in the manifest.
TensorBundle synth_bundle(const SynthDataset& data, const HeadWeights& head, const SynthConfig& cfg);

}  // namespace salve
