#include "covote/denoiser.hpp"

#include <stdexcept>

namespace covote {

int majority_vote(std::span<const int32_t> row, int m) {
  std::vector<int> counts(static_cast<size_t>(m), 0);
  bool any = false;
  for (int32_t v : row) {
    if (v >= 0) {
      counts[static_cast<size_t>(v)] += 1;
      any = true;
    }
  }
  if (!any) throw std::runtime_error("no votes");
  int best = 0;
  for (int r = 1; r < m; ++r) {
    if (counts[static_cast<size_t>(r)] > counts[static_cast<size_t>(best)]) best = r;
  }
  return best;
}

std::vector<double> attention_scores(const AttentionNet& net, std::span<const float> embedding,
                                     std::span<const int32_t> row) {
  const size_t d = embedding.size();
  if (static_cast<int>(d) != net.mlp.in_dim()) {
    throw std::runtime_error("attention_scores: embedding dimension mismatch");
  }
  std::vector<double> x(d), hidden, out;
  std::vector<double> scores(row.size());
  for (size_t j = 0; j < row.size(); ++j) {
    const double v = static_cast<double>(row[j]);
    for (size_t i = 0; i < d; ++i) x[i] = static_cast<double>(embedding[i]) + v;
    nn::mlp_forward(net.mlp, x, hidden, out);
    scores[j] = out[0];
  }
  nn::softmax_inplace(scores);
  return scores;
}

std::vector<double> conditional_reliability(std::span<const double> q,
                                            std::span<const int32_t> row) {
  if (q.size() != row.size()) throw std::runtime_error("conditional_reliability: length mismatch");
  std::vector<double> a(q.size());
  for (size_t j = 0; j < q.size(); ++j) a[j] = row[j] >= 0 ? q[j] : 0.0;
  return a;
}

std::vector<double> global_reliability(const nn::DenseMatrix& conditional) {
  if (conditional.rows == 0) throw std::runtime_error("global_reliability: no matched samples");
  std::vector<double> a(static_cast<size_t>(conditional.cols), 0.0);
  for (int i = 0; i < conditional.rows; ++i) {
    for (int j = 0; j < conditional.cols; ++j) a[static_cast<size_t>(j)] += conditional.at(i, j);
  }
  for (auto& v : a) v /= static_cast<double>(conditional.rows);
  return a;
}

int weighted_vote(std::span<const int32_t> row, std::span<const double> global_a, int m) {
  if (row.size() != global_a.size()) throw std::runtime_error("weighted_vote: length mismatch");
  std::vector<double> mass(static_cast<size_t>(m), 0.0);
  bool any = false;
  for (size_t j = 0; j < row.size(); ++j) {
    if (row[j] >= 0) {
      mass[static_cast<size_t>(row[j])] += global_a[j];
      any = true;
    }
  }
  if (!any) throw std::runtime_error("no votes");
  int best = 0;
  for (int r = 1; r < m; ++r) {
    if (mass[static_cast<size_t>(r)] > mass[static_cast<size_t>(best)]) best = r;
  }
  return best;
}

std::vector<double> rule_prediction(std::span<const int32_t> row, std::span<const double> cond_a,
                                    int m) {
  if (row.size() != cond_a.size()) throw std::runtime_error("rule_prediction: length mismatch");
  std::vector<double> mass(static_cast<size_t>(m), 0.0);
  for (size_t j = 0; j < row.size(); ++j) {
    if (row[j] >= 0) mass[static_cast<size_t>(row[j])] += cond_a[j];
  }
  nn::softmax_inplace(mass);
  return mass;
}

}  // namespace covote
