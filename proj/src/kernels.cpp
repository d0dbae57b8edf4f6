#include "covote/kernels.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace covote::kernels {

namespace {

// scratch buffers reused across the samples of one chunk
struct DenoiserScratch {
  std::vector<double> x;        // d
  std::vector<double> hidden;   // d_h (forward temp)
  std::vector<double> out;      // 1
  nn::DenseMatrix hiddens;      // k x d_h, saved per source for backward
  std::vector<double> qhat;     // k
  std::vector<double> gq;       // k
  std::vector<double> gqhat;    // k
  std::vector<double> y;        // m
  std::vector<double> gy;       // m
  std::vector<double> upstream; // 1

  DenoiserScratch(int d, int d_h, int k, int m)
      : x(static_cast<size_t>(d)),
        hiddens(k, d_h),
        qhat(static_cast<size_t>(k)),
        gq(static_cast<size_t>(k)),
        gqhat(static_cast<size_t>(k)),
        y(static_cast<size_t>(m)),
        gy(static_cast<size_t>(m)),
        upstream(1) {}
};

double denoiser_sample(const nn::MlpParams& attention, const EmbeddingMatrix& embeddings,
                       const WeakLabelMatrix& weak, int64_t row, int target, int m,
                       DenoiserScratch& s, std::span<double> cond_row, std::span<double> zhat_row,
                       nn::MlpGrads* grads) {
  const int k = weak.k;
  const auto emb = embeddings.row(static_cast<size_t>(row));
  const size_t d = emb.size();

  for (int j = 0; j < k; ++j) {
    const double v = static_cast<double>(weak.vote(row, j));
    for (size_t i = 0; i < d; ++i) s.x[i] = static_cast<double>(emb[i]) + v;
    nn::mlp_forward(attention, s.x, s.hidden, s.out);
    std::copy(s.hidden.begin(), s.hidden.end(), s.hiddens.row(j).begin());
    s.qhat[static_cast<size_t>(j)] = s.out[0];
  }

  // softmax over all k sources, then mask abstainers (no renormalization)
  std::vector<double>& q = s.qhat;
  nn::softmax_inplace(q);
  for (int j = 0; j < k; ++j) {
    cond_row[static_cast<size_t>(j)] = weak.vote(row, j) >= 0 ? q[static_cast<size_t>(j)] : 0.0;
  }

  std::fill(s.y.begin(), s.y.end(), 0.0);
  for (int j = 0; j < k; ++j) {
    const int32_t v = weak.vote(row, j);
    if (v >= 0) s.y[static_cast<size_t>(v)] += cond_row[static_cast<size_t>(j)];
  }
  for (int r = 0; r < m; ++r) zhat_row[static_cast<size_t>(r)] = s.y[static_cast<size_t>(r)];
  {
    // softmax over classes, in place on the output row
    double mx = zhat_row[0];
    for (int r = 1; r < m; ++r) mx = std::max(mx, zhat_row[static_cast<size_t>(r)]);
    double sum = 0;
    for (int r = 0; r < m; ++r) {
      zhat_row[static_cast<size_t>(r)] = std::exp(zhat_row[static_cast<size_t>(r)] - mx);
      sum += zhat_row[static_cast<size_t>(r)];
    }
    for (int r = 0; r < m; ++r) zhat_row[static_cast<size_t>(r)] /= sum;
  }

  const double loss = -std::log(std::max(zhat_row[static_cast<size_t>(target)], 1e-12));

  if (grads) {
    for (int r = 0; r < m; ++r) s.gy[static_cast<size_t>(r)] = zhat_row[static_cast<size_t>(r)];
    s.gy[static_cast<size_t>(target)] -= 1.0;
    // vote mass routes the class gradient back to the voting sources
    for (int j = 0; j < k; ++j) {
      const int32_t v = weak.vote(row, j);
      s.gq[static_cast<size_t>(j)] = v >= 0 ? s.gy[static_cast<size_t>(v)] : 0.0;
    }
    nn::softmax_backward(q, s.gq, s.gqhat);
    for (int j = 0; j < k; ++j) {
      const double v = static_cast<double>(weak.vote(row, j));
      for (size_t i = 0; i < d; ++i) s.x[i] = static_cast<double>(emb[i]) + v;
      s.upstream[0] = s.gqhat[static_cast<size_t>(j)];
      nn::mlp_backward(attention, s.x, s.hiddens.row(j), s.upstream, *grads);
    }
  }
  return loss;
}

struct ClassifierScratch {
  std::vector<double> x;
  std::vector<double> hidden;
  std::vector<double> out;
  std::vector<double> glogits;

  ClassifierScratch(int d, int out_dim)
      : x(static_cast<size_t>(d)), glogits(static_cast<size_t>(out_dim)) {}
};

void classifier_forward_sample(const nn::MlpParams& classifier, const EmbeddingMatrix& embeddings,
                               int64_t row, ClassifierScratch& s, std::span<double> probs_row) {
  const auto emb = embeddings.row(static_cast<size_t>(row));
  for (size_t i = 0; i < emb.size(); ++i) s.x[i] = static_cast<double>(emb[i]);
  nn::mlp_forward(classifier, s.x, s.hidden, s.out);
  nn::softmax_inplace(s.out);
  std::copy(s.out.begin(), s.out.end(), probs_row.begin());
}

double supervised_sample(const nn::MlpParams& classifier, const EmbeddingMatrix& embeddings,
                         int64_t row, int target, ClassifierScratch& s, nn::MlpGrads* grads) {
  const auto emb = embeddings.row(static_cast<size_t>(row));
  for (size_t i = 0; i < emb.size(); ++i) s.x[i] = static_cast<double>(emb[i]);
  nn::mlp_forward(classifier, s.x, s.hidden, s.out);
  nn::softmax_inplace(s.out);
  const double loss = -std::log(std::max(s.out[static_cast<size_t>(target)], 1e-12));
  if (grads) {
    nn::cross_entropy_grad(s.out, target, s.glogits);
    nn::mlp_backward(classifier, s.x, s.hidden, s.glogits, *grads);
  }
  return loss;
}

double selftrain_sample(const nn::MlpParams& classifier, const EmbeddingMatrix& embeddings,
                        int64_t row, std::span<const double> target, ClassifierScratch& s,
                        nn::MlpGrads* grads) {
  const auto emb = embeddings.row(static_cast<size_t>(row));
  for (size_t i = 0; i < emb.size(); ++i) s.x[i] = static_cast<double>(emb[i]);
  nn::mlp_forward(classifier, s.x, s.hidden, s.out);
  nn::softmax_inplace(s.out);
  double loss = 0;
  for (size_t r = 0; r < s.out.size(); ++r) {
    const double diff = s.out[r] - target[r];
    loss += diff * diff;
  }
  if (grads) {
    std::vector<double>& dprobs = s.glogits;  // reuse, same length
    for (size_t r = 0; r < s.out.size(); ++r) dprobs[r] = 2.0 * (s.out[r] - target[r]);
    std::vector<double> dlogits(s.out.size());
    nn::softmax_backward(s.out, dprobs, dlogits);
    nn::mlp_backward(classifier, s.x, s.hidden, dlogits, *grads);
  }
  return loss;
}

double ordered_sum(std::span<const double> values) {
  double acc = 0;
  for (double v : values) acc += v;
  return acc;
}

void check_rows(const EmbeddingMatrix& embeddings, std::span<const int64_t> rows) {
  for (int64_t r : rows) {
    if (r < 0 || static_cast<uint32_t>(r) >= embeddings.n) {
      throw std::runtime_error("kernel row index out of range");
    }
  }
}

}  // namespace

DenoiserPass denoiser_pass(ExecBackend backend, const nn::MlpParams& attention,
                           const EmbeddingMatrix& embeddings, const WeakLabelMatrix& weak,
                           std::span<const int64_t> rows, std::span<const int> targets, int m,
                           bool want_grads) {
  if (static_cast<int>(embeddings.d) != attention.in_dim()) {
    throw std::runtime_error("denoiser_pass: embedding dimension mismatch");
  }
  if (attention.out_dim() != 1) throw std::runtime_error("denoiser_pass: attention out_dim must be 1");
  if (rows.size() != targets.size()) throw std::runtime_error("denoiser_pass: target count mismatch");
  check_rows(embeddings, rows);
  for (int t : targets) {
    if (t < 0 || t >= m) throw std::runtime_error("denoiser_pass: target out of range");
  }

  const int n = static_cast<int>(rows.size());
  DenoiserPass pass;
  pass.conditional = nn::DenseMatrix(n, weak.k);
  pass.rule_probs = nn::DenseMatrix(n, m);
  pass.grads = nn::MlpGrads(attention);
  if (n == 0) return pass;

  const int d = attention.in_dim(), d_h = attention.hidden_dim();
  std::vector<double> sample_loss(static_cast<size_t>(n), 0.0);

  if (backend == ExecBackend::kSerial) {
    DenoiserScratch scratch(d, d_h, weak.k, m);
    for (int p = 0; p < n; ++p) {
      sample_loss[static_cast<size_t>(p)] = denoiser_sample(
          attention, embeddings, weak, rows[static_cast<size_t>(p)], targets[static_cast<size_t>(p)],
          m, scratch, pass.conditional.row(p), pass.rule_probs.row(p),
          want_grads ? &pass.grads : nullptr);
    }
  } else {
    const ChunkPlan plan(n);
    std::vector<nn::MlpGrads> chunk_grads;
    if (want_grads) chunk_grads.assign(static_cast<size_t>(plan.chunks), nn::MlpGrads(attention));
#pragma omp parallel for schedule(static)
    for (int c = 0; c < plan.chunks; ++c) {
      DenoiserScratch scratch(d, d_h, weak.k, m);
      nn::MlpGrads* g = want_grads ? &chunk_grads[static_cast<size_t>(c)] : nullptr;
      for (int64_t p = plan.begin(c); p < plan.end(c); ++p) {
        const int pi = static_cast<int>(p);
        sample_loss[static_cast<size_t>(p)] = denoiser_sample(
            attention, embeddings, weak, rows[static_cast<size_t>(p)],
            targets[static_cast<size_t>(p)], m, scratch, pass.conditional.row(pi),
            pass.rule_probs.row(pi), g);
      }
    }
    if (want_grads) {
      for (const auto& g : chunk_grads) pass.grads.add(g);
    }
  }
  pass.loss = ordered_sum(sample_loss);
  return pass;
}

void classifier_probs(ExecBackend backend, const nn::MlpParams& classifier,
                      const EmbeddingMatrix& embeddings, std::span<const int64_t> rows,
                      nn::DenseMatrix& probs) {
  if (static_cast<int>(embeddings.d) != classifier.in_dim()) {
    throw std::runtime_error("classifier_probs: embedding dimension mismatch");
  }
  check_rows(embeddings, rows);
  const int n = static_cast<int>(rows.size());
  probs = nn::DenseMatrix(n, classifier.out_dim());
  if (n == 0) return;

  if (backend == ExecBackend::kSerial) {
    ClassifierScratch scratch(classifier.in_dim(), classifier.out_dim());
    for (int p = 0; p < n; ++p) {
      classifier_forward_sample(classifier, embeddings, rows[static_cast<size_t>(p)], scratch,
                                probs.row(p));
    }
  } else {
    const ChunkPlan plan(n);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < plan.chunks; ++c) {
      ClassifierScratch scratch(classifier.in_dim(), classifier.out_dim());
      for (int64_t p = plan.begin(c); p < plan.end(c); ++p) {
        classifier_forward_sample(classifier, embeddings, rows[static_cast<size_t>(p)], scratch,
                                  probs.row(static_cast<int>(p)));
      }
    }
  }
}

double supervised_backward(ExecBackend backend, const nn::MlpParams& classifier,
                           const EmbeddingMatrix& embeddings, std::span<const int64_t> rows,
                           std::span<const int> targets, nn::MlpGrads& grads) {
  if (static_cast<int>(embeddings.d) != classifier.in_dim()) {
    throw std::runtime_error("supervised_backward: embedding dimension mismatch");
  }
  if (rows.size() != targets.size()) {
    throw std::runtime_error("supervised_backward: target count mismatch");
  }
  check_rows(embeddings, rows);
  for (int t : targets) {
    if (t < 0 || t >= classifier.out_dim()) {
      throw std::runtime_error("supervised_backward: target out of range");
    }
  }
  const int64_t n = static_cast<int64_t>(rows.size());
  if (n == 0) return 0.0;
  std::vector<double> sample_loss(static_cast<size_t>(n), 0.0);

  if (backend == ExecBackend::kSerial) {
    ClassifierScratch scratch(classifier.in_dim(), classifier.out_dim());
    for (int64_t p = 0; p < n; ++p) {
      sample_loss[static_cast<size_t>(p)] =
          supervised_sample(classifier, embeddings, rows[static_cast<size_t>(p)],
                            targets[static_cast<size_t>(p)], scratch, &grads);
    }
  } else {
    const ChunkPlan plan(n);
    std::vector<nn::MlpGrads> chunk_grads(static_cast<size_t>(plan.chunks),
                                          nn::MlpGrads(classifier));
#pragma omp parallel for schedule(static)
    for (int c = 0; c < plan.chunks; ++c) {
      ClassifierScratch scratch(classifier.in_dim(), classifier.out_dim());
      for (int64_t p = plan.begin(c); p < plan.end(c); ++p) {
        sample_loss[static_cast<size_t>(p)] =
            supervised_sample(classifier, embeddings, rows[static_cast<size_t>(p)],
                              targets[static_cast<size_t>(p)], scratch,
                              &chunk_grads[static_cast<size_t>(c)]);
      }
    }
    for (const auto& g : chunk_grads) grads.add(g);
  }
  return ordered_sum(sample_loss);
}

double selftrain_backward(ExecBackend backend, const nn::MlpParams& classifier,
                          const EmbeddingMatrix& embeddings, std::span<const int64_t> rows,
                          const nn::DenseMatrix& targets, nn::MlpGrads& grads) {
  if (static_cast<int>(embeddings.d) != classifier.in_dim()) {
    throw std::runtime_error("selftrain_backward: embedding dimension mismatch");
  }
  if (targets.rows != static_cast<int>(rows.size()) || targets.cols != classifier.out_dim()) {
    throw std::runtime_error("selftrain_backward: target shape mismatch");
  }
  check_rows(embeddings, rows);
  const int64_t n = static_cast<int64_t>(rows.size());
  if (n == 0) return 0.0;
  std::vector<double> sample_loss(static_cast<size_t>(n), 0.0);

  if (backend == ExecBackend::kSerial) {
    ClassifierScratch scratch(classifier.in_dim(), classifier.out_dim());
    for (int64_t p = 0; p < n; ++p) {
      sample_loss[static_cast<size_t>(p)] =
          selftrain_sample(classifier, embeddings, rows[static_cast<size_t>(p)],
                           targets.row(static_cast<int>(p)), scratch, &grads);
    }
  } else {
    const ChunkPlan plan(n);
    std::vector<nn::MlpGrads> chunk_grads(static_cast<size_t>(plan.chunks),
                                          nn::MlpGrads(classifier));
#pragma omp parallel for schedule(static)
    for (int c = 0; c < plan.chunks; ++c) {
      ClassifierScratch scratch(classifier.in_dim(), classifier.out_dim());
      for (int64_t p = plan.begin(c); p < plan.end(c); ++p) {
        sample_loss[static_cast<size_t>(p)] =
            selftrain_sample(classifier, embeddings, rows[static_cast<size_t>(p)],
                             targets.row(static_cast<int>(p)), scratch,
                             &chunk_grads[static_cast<size_t>(c)]);
      }
    }
    for (const auto& g : chunk_grads) grads.add(g);
  }
  return ordered_sum(sample_loss);
}

}  // namespace covote::kernels
