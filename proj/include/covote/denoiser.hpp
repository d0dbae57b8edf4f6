#pragma once

// Label denoiser primitives: conditional attention over labeling sources,
// conditional and global reliability scores, majority / reliability-
// weighted voting and the rule-based soft prediction.
//
// The attention net scores source j on document i from the broadcast sum
// vote_ij + B_i (the abstain value -1 included), softmax-normalizes the k
// scores, then masks out abstaining sources without renormalizing.

#include <span>
#include <vector>

#include "covote/corpus.hpp"
#include "covote/nn.hpp"

namespace covote {

struct AttentionNet {
  nn::MlpParams mlp;  // in_dim = embedding dim, out_dim = 1
};

// argmax over vote counts, ties to the lowest class index; throws on an
// all-abstain row
int majority_vote(std::span<const int32_t> row, int m);

// q_i: softmax over all k sources of the per-source attention scores
std::vector<double> attention_scores(const AttentionNet& net, std::span<const float> embedding,
                                     std::span<const int32_t> row);

// a_ij = q_ij where source j voted, 0 elsewhere (not renormalized)
std::vector<double> conditional_reliability(std::span<const double> q,
                                            std::span<const int32_t> row);

// column means of the conditional matrix over matched samples
std::vector<double> global_reliability(const nn::DenseMatrix& conditional);

// argmax_r sum_j a_j [vote_ij == r], ties to the lowest class index
int weighted_vote(std::span<const int32_t> row, std::span<const double> global_a, int m);

// z_hat_i = softmax over classes of the masked reliability mass
std::vector<double> rule_prediction(std::span<const int32_t> row, std::span<const double> cond_a,
                                    int m);

}  // namespace covote
