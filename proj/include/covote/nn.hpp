#pragma once

// Minimal dense numeric kernel: row-major matrices, a two-layer tanh MLP
// with exact analytic gradients, softmax / cross-entropy, Adam, seeded
// Glorot initialization and finite-difference gradient checking.
//
// Everything on the training path is 64-bit; the networks are tiny, so
// precision wins over speed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace covote::nn {

struct DenseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  DenseMatrix() = default;
  DenseMatrix(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
  std::span<double> row(int r) { return {v.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)}; }
  std::span<const double> row(int r) const {
    return {v.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
  }
  void zero() { std::fill(v.begin(), v.end(), 0.0); }
};

// hidden = tanh(w1 x + b1); output = w2 hidden + b2 (pre-softmax logits)
struct MlpParams {
  DenseMatrix w1;          // hidden x in
  std::vector<double> b1;  // hidden
  DenseMatrix w2;          // out x hidden
  std::vector<double> b2;  // out

  int in_dim() const { return w1.cols; }
  int hidden_dim() const { return w1.rows; }
  int out_dim() const { return w2.rows; }
};

struct MlpGrads {
  DenseMatrix w1;
  std::vector<double> b1;
  DenseMatrix w2;
  std::vector<double> b2;

  MlpGrads() = default;
  explicit MlpGrads(const MlpParams& p);
  void zero();
  void add(const MlpGrads& other);
  void add_scaled(const MlpGrads& other, double s);
  void scale(double s);
  bool finite() const;
};

// deterministic across platforms: uniforms are built from raw mt19937_64
// output, not from std::uniform_real_distribution
struct Rng {
  std::mt19937_64 gen;
  explicit Rng(uint64_t seed) : gen(seed) {}

  double uniform() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }
  uint64_t below(uint64_t n) { return gen() % n; }
  double gaussian() {
    // Box-Muller; two fresh uniforms per call keeps the stream simple
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }
};

uint64_t mix_seed(uint64_t seed, uint64_t tag);

// Glorot-uniform weights, zero biases.
MlpParams init_params(int in_dim, int hidden_dim, int out_dim, uint64_t seed);

void mlp_forward(const MlpParams& p, std::span<const double> x, std::vector<double>& hidden,
                 std::vector<double>& out);

// Accumulates (+=) exact gradients of the forward map into acc; x_grad,
// when non-null, receives d(out.upstream)/dx.
void mlp_backward(const MlpParams& p, std::span<const double> x, std::span<const double> hidden,
                  std::span<const double> upstream, MlpGrads& acc,
                  std::vector<double>* x_grad = nullptr);

std::vector<double> softmax(std::span<const double> logits);
void softmax_inplace(std::vector<double>& values);

// d(loss)/d(logits) given d(loss)/d(probs), for probs = softmax(logits)
void softmax_backward(std::span<const double> probs, std::span<const double> dprobs,
                      std::span<double> dlogits);

// -log(p[target]) with p clamped to >= 1e-12
double cross_entropy(std::span<const double> probs, int target);
// gradient wrt logits: probs - onehot(target)
void cross_entropy_grad(std::span<const double> probs, int target, std::span<double> out);

struct AdamState {
  MlpGrads m;
  MlpGrads v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double lr = 0.02;

  AdamState() = default;
  AdamState(const MlpParams& p, double lr);
};

// standard Adam with bias correction; throws "gradient overflow" on a
// non-finite gradient
void adam_step(AdamState& state, MlpParams& params, const MlpGrads& grads);

// ---- finite-difference gradient checking ----

struct TensorRef {
  std::string name;
  std::span<double> values;        // parameters, perturbed in place
  std::span<const double> grads;   // analytic gradients to verify
};

std::vector<TensorRef> tensor_refs(const std::string& prefix, MlpParams& params,
                                   const MlpGrads& grads);

struct GradCheckResult {
  double max_rel_err = 0;
  std::string worst;  // "tensor[index]"
};

// Central differences with step h; relative error uses a floored
// denominator max(|analytic|, |numeric|, 1e-3) so near-zero components
// are judged on an absolute scale.
GradCheckResult check_gradients(const std::function<double()>& loss_fn,
                                std::span<TensorRef> tensors, double h = 1e-5);

// ---- checkpoint blocks (magic "WSM1" at file level) ----

void write_mlp(std::ostream& os, const MlpParams& p);
MlpParams read_mlp(std::istream& is);

// single-net checkpoint: magic "WSM1", u32 kind=1, u64 seed echo, tensors
void save_mlp_file(const std::string& path, const MlpParams& p, uint64_t seed);
std::pair<MlpParams, uint64_t> load_mlp_file(const std::string& path);

}  // namespace covote::nn
