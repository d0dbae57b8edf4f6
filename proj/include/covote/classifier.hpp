#pragma once

// Neural classifier over precomputed embeddings: two-layer network plus
// softmax, and argmax confidence extraction.

#include <span>
#include <utility>
#include <vector>

#include "covote/nn.hpp"

namespace covote {

struct NeuralClassifier {
  nn::MlpParams mlp;  // in_dim = embedding dim, out_dim = class count
};

std::vector<double> classify(const NeuralClassifier& net, std::span<const float> embedding);

// (argmax class, its probability); ties to the lowest class index
std::pair<int, double> confidence(std::span<const double> distribution);

}  // namespace covote
