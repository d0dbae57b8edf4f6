#pragma once

// Per-epoch compute kernels over the corpus, each in two variants: a plain
// serial reference implementation and an OpenMP-parallel one. Per-sample
// outputs (probability rows, per-sample losses) are bit-identical between
// the two; gradient sums differ only by floating-point reassociation.
//
// Parallel determinism: samples are split into a fixed number of chunks
// (independent of the thread count), each chunk accumulates its contiguous
// range in index order, and chunk results are folded in chunk order. Two
// runs therefore produce identical bits no matter how many threads run.

#include <cstdint>
#include <span>

#include "covote/corpus.hpp"
#include "covote/nn.hpp"
#include "covote/rules.hpp"

namespace covote::kernels {

using covote::ExecBackend;

inline constexpr int kGradChunks = 16;

struct ChunkPlan {
  int64_t count = 0;
  int chunks = 0;

  explicit ChunkPlan(int64_t n)
      : count(n), chunks(n == 0 ? 0 : static_cast<int>(std::min<int64_t>(kGradChunks, n))) {}

  int64_t begin(int c) const {
    const int64_t base = count / chunks, rem = count % chunks;
    return c * base + std::min<int64_t>(c, rem);
  }
  int64_t end(int c) const { return begin(c + 1 > chunks ? chunks : c + 1); }
};

// One pass of the label denoiser over the matched rows: attention scores,
// masked conditional reliabilities, rule-based soft predictions, the
// denoiser loss against `targets`, and (optionally) its gradient wrt the
// attention-net parameters.
struct DenoiserPass {
  nn::DenseMatrix conditional;  // rows.size() x k
  nn::DenseMatrix rule_probs;   // rows.size() x m
  double loss = 0;
  nn::MlpGrads grads;
};

DenoiserPass denoiser_pass(ExecBackend backend, const nn::MlpParams& attention,
                           const EmbeddingMatrix& embeddings, const WeakLabelMatrix& weak,
                           std::span<const int64_t> rows, std::span<const int> targets, int m,
                           bool want_grads);

// Softmax outputs of the classifier for the given rows; probs is resized
// to rows.size() x out_dim.
void classifier_probs(ExecBackend backend, const nn::MlpParams& classifier,
                      const EmbeddingMatrix& embeddings, std::span<const int64_t> rows,
                      nn::DenseMatrix& probs);

// Hard-label cross-entropy over rows (a sum); accumulates gradients wrt
// the classifier parameters into grads.
double supervised_backward(ExecBackend backend, const nn::MlpParams& classifier,
                           const EmbeddingMatrix& embeddings, std::span<const int64_t> rows,
                           std::span<const int> targets, nn::MlpGrads& grads);

// Sum of squared distances between classifier outputs and fixed targets
// (one target row per sample position); accumulates gradients into grads.
double selftrain_backward(ExecBackend backend, const nn::MlpParams& classifier,
                          const EmbeddingMatrix& embeddings, std::span<const int64_t> rows,
                          const nn::DenseMatrix& targets, nn::MlpGrads& grads);

}  // namespace covote::kernels
