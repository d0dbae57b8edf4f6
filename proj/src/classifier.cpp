#include "covote/classifier.hpp"

#include <stdexcept>

namespace covote {

std::vector<double> classify(const NeuralClassifier& net, std::span<const float> embedding) {
  if (static_cast<int>(embedding.size()) != net.mlp.in_dim()) {
    throw std::runtime_error("classify: embedding dimension mismatch");
  }
  std::vector<double> x(embedding.size());
  for (size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(embedding[i]);
  std::vector<double> hidden, out;
  nn::mlp_forward(net.mlp, x, hidden, out);
  nn::softmax_inplace(out);
  return out;
}

std::pair<int, double> confidence(std::span<const double> distribution) {
  int best = 0;
  for (size_t r = 1; r < distribution.size(); ++r) {
    if (distribution[r] > distribution[static_cast<size_t>(best)]) best = static_cast<int>(r);
  }
  return {best, distribution[static_cast<size_t>(best)]};
}

}  // namespace covote
