#pragma once

// Synthetic two-class corpus with Gaussian-separated embeddings and
// configurable weak sources (per-source accuracy and coverage). Ground
// truth is known, so denoising quality is directly measurable.

#include <string>
#include <vector>

#include "covote/corpus.hpp"
#include "covote/nn.hpp"
#include "covote/rules.hpp"

namespace testutil {

struct SynthData {
  std::vector<covote::Document> docs;
  covote::EmbeddingMatrix embeddings;
  covote::WeakLabelMatrix weak;
};

inline SynthData make_synthetic(int n, int d, uint64_t seed,
                                const std::vector<double>& source_accuracies, double coverage,
                                double separation = 0.9) {
  covote::nn::Rng rng(seed);
  SynthData data;
  data.embeddings.n = static_cast<uint32_t>(n);
  data.embeddings.d = static_cast<uint32_t>(d);
  data.embeddings.values.resize(static_cast<size_t>(n) * d);
  data.weak.n = n;
  data.weak.k = static_cast<int>(source_accuracies.size());
  data.weak.votes.assign(static_cast<size_t>(n) * data.weak.k, -1);

  for (int i = 0; i < n; ++i) {
    const int label = static_cast<int>(rng.below(2));
    covote::Document doc;
    doc.id = "s" + std::to_string(i);
    doc.text = "synthetic";
    doc.gold_label = label;
    data.docs.push_back(doc);

    const double mean = label == 0 ? -separation : separation;
    for (int c = 0; c < d; ++c) {
      data.embeddings.values[static_cast<size_t>(i) * d + c] =
          static_cast<float>(mean + rng.gaussian());
    }
    for (int j = 0; j < data.weak.k; ++j) {
      if (rng.uniform() < coverage) {
        const bool correct = rng.uniform() < source_accuracies[static_cast<size_t>(j)];
        data.weak.votes[static_cast<size_t>(i) * data.weak.k + j] = correct ? label : 1 - label;
      }
    }
  }
  covote::split_corpus(data.docs, {0.8, 0.1, 0.1}, seed + 1);
  return data;
}

}  // namespace testutil
