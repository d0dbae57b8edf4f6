#include "covote/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "covote/binio.hpp"

namespace covote::nn {

MlpGrads::MlpGrads(const MlpParams& p)
    : w1(p.w1.rows, p.w1.cols), b1(p.b1.size(), 0.0), w2(p.w2.rows, p.w2.cols), b2(p.b2.size(), 0.0) {}

void MlpGrads::zero() {
  w1.zero();
  std::fill(b1.begin(), b1.end(), 0.0);
  w2.zero();
  std::fill(b2.begin(), b2.end(), 0.0);
}

void MlpGrads::add(const MlpGrads& o) { add_scaled(o, 1.0); }

void MlpGrads::add_scaled(const MlpGrads& o, double s) {
  for (size_t i = 0; i < w1.v.size(); ++i) w1.v[i] += s * o.w1.v[i];
  for (size_t i = 0; i < b1.size(); ++i) b1[i] += s * o.b1[i];
  for (size_t i = 0; i < w2.v.size(); ++i) w2.v[i] += s * o.w2.v[i];
  for (size_t i = 0; i < b2.size(); ++i) b2[i] += s * o.b2[i];
}

void MlpGrads::scale(double s) {
  for (auto& x : w1.v) x *= s;
  for (auto& x : b1) x *= s;
  for (auto& x : w2.v) x *= s;
  for (auto& x : b2) x *= s;
}

bool MlpGrads::finite() const {
  auto ok = [](const std::vector<double>& v) {
    for (double x : v) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  };
  return ok(w1.v) && ok(b1) && ok(w2.v) && ok(b2);
}

uint64_t mix_seed(uint64_t seed, uint64_t tag) {
  // splitmix64 finalizer over seed xor tag
  uint64_t z = seed ^ (tag + 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

MlpParams init_params(int in_dim, int hidden_dim, int out_dim, uint64_t seed) {
  if (in_dim <= 0 || hidden_dim <= 0 || out_dim <= 0) {
    throw std::runtime_error("network dimensions must be positive");
  }
  MlpParams p;
  p.w1 = DenseMatrix(hidden_dim, in_dim);
  p.b1.assign(static_cast<size_t>(hidden_dim), 0.0);
  p.w2 = DenseMatrix(out_dim, hidden_dim);
  p.b2.assign(static_cast<size_t>(out_dim), 0.0);

  Rng rng(seed);
  double bound1 = std::sqrt(6.0 / (in_dim + hidden_dim));
  for (auto& w : p.w1.v) w = rng.uniform(-bound1, bound1);
  double bound2 = std::sqrt(6.0 / (hidden_dim + out_dim));
  for (auto& w : p.w2.v) w = rng.uniform(-bound2, bound2);
  return p;
}

void mlp_forward(const MlpParams& p, std::span<const double> x, std::vector<double>& hidden,
                 std::vector<double>& out) {
  const int in = p.in_dim(), hid = p.hidden_dim(), od = p.out_dim();
  if (static_cast<int>(x.size()) != in) throw std::runtime_error("mlp_forward: dimension mismatch");
  hidden.resize(static_cast<size_t>(hid));
  out.resize(static_cast<size_t>(od));
  for (int h = 0; h < hid; ++h) {
    const double* wrow = p.w1.v.data() + static_cast<size_t>(h) * in;
    double acc = p.b1[static_cast<size_t>(h)];
    for (int i = 0; i < in; ++i) acc += wrow[i] * x[static_cast<size_t>(i)];
    hidden[static_cast<size_t>(h)] = std::tanh(acc);
  }
  for (int o = 0; o < od; ++o) {
    const double* wrow = p.w2.v.data() + static_cast<size_t>(o) * hid;
    double acc = p.b2[static_cast<size_t>(o)];
    for (int h = 0; h < hid; ++h) acc += wrow[h] * hidden[static_cast<size_t>(h)];
    out[static_cast<size_t>(o)] = acc;
  }
}

void mlp_backward(const MlpParams& p, std::span<const double> x, std::span<const double> hidden,
                  std::span<const double> upstream, MlpGrads& acc, std::vector<double>* x_grad) {
  const int in = p.in_dim(), hid = p.hidden_dim(), od = p.out_dim();
  if (static_cast<int>(x.size()) != in || static_cast<int>(hidden.size()) != hid ||
      static_cast<int>(upstream.size()) != od) {
    throw std::runtime_error("mlp_backward: dimension mismatch");
  }

  // layer 2: out = w2 h + b2
  for (int o = 0; o < od; ++o) {
    const double g = upstream[static_cast<size_t>(o)];
    double* grow = acc.w2.v.data() + static_cast<size_t>(o) * hid;
    for (int h = 0; h < hid; ++h) grow[h] += g * hidden[static_cast<size_t>(h)];
    acc.b2[static_cast<size_t>(o)] += g;
  }

  // pre-activation gradient: (w2^T upstream) * (1 - h^2)
  for (int h = 0; h < hid; ++h) {
    double gh = 0;
    for (int o = 0; o < od; ++o) {
      gh += p.w2.at(o, h) * upstream[static_cast<size_t>(o)];
    }
    const double hv = hidden[static_cast<size_t>(h)];
    const double gpre = gh * (1.0 - hv * hv);
    double* grow = acc.w1.v.data() + static_cast<size_t>(h) * in;
    for (int i = 0; i < in; ++i) grow[i] += gpre * x[static_cast<size_t>(i)];
    acc.b1[static_cast<size_t>(h)] += gpre;
    if (x_grad) {
      for (int i = 0; i < in; ++i) {
        (*x_grad)[static_cast<size_t>(i)] += gpre * p.w1.at(h, i);
      }
    }
  }
}

void softmax_inplace(std::vector<double>& values) {
  double mx = values[0];
  for (double v : values) mx = std::max(mx, v);
  double sum = 0;
  for (auto& v : values) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : values) v /= sum;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  softmax_inplace(out);
  return out;
}

void softmax_backward(std::span<const double> probs, std::span<const double> dprobs,
                      std::span<double> dlogits) {
  double dot = 0;
  for (size_t i = 0; i < probs.size(); ++i) dot += probs[i] * dprobs[i];
  for (size_t i = 0; i < probs.size(); ++i) dlogits[i] = probs[i] * (dprobs[i] - dot);
}

double cross_entropy(std::span<const double> probs, int target) {
  if (target < 0 || target >= static_cast<int>(probs.size())) {
    throw std::runtime_error("cross_entropy: target out of range");
  }
  return -std::log(std::max(probs[static_cast<size_t>(target)], 1e-12));
}

void cross_entropy_grad(std::span<const double> probs, int target, std::span<double> out) {
  if (target < 0 || target >= static_cast<int>(probs.size())) {
    throw std::runtime_error("cross_entropy: target out of range");
  }
  for (size_t i = 0; i < probs.size(); ++i) out[i] = probs[i];
  out[static_cast<size_t>(target)] -= 1.0;
}

AdamState::AdamState(const MlpParams& p, double lr_) : m(p), v(p), lr(lr_) {}

static void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                        std::span<double> v, const AdamState& s, double corr1, double corr2) {
  for (size_t i = 0; i < param.size(); ++i) {
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * grad[i];
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
    const double mhat = m[i] / corr1;
    const double vhat = v[i] / corr2;
    param[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

void adam_step(AdamState& state, MlpParams& params, const MlpGrads& grads) {
  if (!grads.finite()) throw std::runtime_error("gradient overflow");
  state.step += 1;
  const double corr1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double corr2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  adam_update(params.w1.v, grads.w1.v, state.m.w1.v, state.v.w1.v, state, corr1, corr2);
  adam_update(params.b1, grads.b1, state.m.b1, state.v.b1, state, corr1, corr2);
  adam_update(params.w2.v, grads.w2.v, state.m.w2.v, state.v.w2.v, state, corr1, corr2);
  adam_update(params.b2, grads.b2, state.m.b2, state.v.b2, state, corr1, corr2);
}

std::vector<TensorRef> tensor_refs(const std::string& prefix, MlpParams& params,
                                   const MlpGrads& grads) {
  std::vector<TensorRef> refs;
  refs.push_back({prefix + ".w1", params.w1.v, grads.w1.v});
  refs.push_back({prefix + ".b1", params.b1, grads.b1});
  refs.push_back({prefix + ".w2", params.w2.v, grads.w2.v});
  refs.push_back({prefix + ".b2", params.b2, grads.b2});
  return refs;
}

GradCheckResult check_gradients(const std::function<double()>& loss_fn,
                                std::span<TensorRef> tensors, double h) {
  GradCheckResult result;
  for (auto& t : tensors) {
    for (size_t i = 0; i < t.values.size(); ++i) {
      const double saved = t.values[i];
      t.values[i] = saved + h;
      const double up = loss_fn();
      t.values[i] = saved - h;
      const double down = loss_fn();
      t.values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = t.grads[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
      const double rel = std::abs(analytic - numeric) / denom;
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst = t.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

void write_mlp(std::ostream& os, const MlpParams& p) {
  binio::write_u32(os, static_cast<uint32_t>(p.in_dim()));
  binio::write_u32(os, static_cast<uint32_t>(p.hidden_dim()));
  binio::write_u32(os, static_cast<uint32_t>(p.out_dim()));
  for (double v : p.w1.v) binio::write_f64(os, v);
  for (double v : p.b1) binio::write_f64(os, v);
  for (double v : p.w2.v) binio::write_f64(os, v);
  for (double v : p.b2) binio::write_f64(os, v);
}

MlpParams read_mlp(std::istream& is) {
  const int in = static_cast<int>(binio::read_u32(is));
  const int hid = static_cast<int>(binio::read_u32(is));
  const int out = static_cast<int>(binio::read_u32(is));
  if (in <= 0 || hid <= 0 || out <= 0) throw std::runtime_error("corrupt checkpoint: bad dims");
  MlpParams p;
  p.w1 = DenseMatrix(hid, in);
  p.b1.assign(static_cast<size_t>(hid), 0.0);
  p.w2 = DenseMatrix(out, hid);
  p.b2.assign(static_cast<size_t>(out), 0.0);
  for (auto& v : p.w1.v) v = binio::read_f64(is);
  for (auto& v : p.b1) v = binio::read_f64(is);
  for (auto& v : p.w2.v) v = binio::read_f64(is);
  for (auto& v : p.b2) v = binio::read_f64(is);
  return p;
}

void save_mlp_file(const std::string& path, const MlpParams& p, uint64_t seed) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  binio::write_magic(out, "WSM1");
  binio::write_u32(out, 1);  // kind: single net
  binio::write_u64(out, seed);
  write_mlp(out, p);
}

std::pair<MlpParams, uint64_t> load_mlp_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  binio::expect_magic(in, "WSM1", "checkpoint");
  const uint32_t kind = binio::read_u32(in);
  if (kind != 1) throw std::runtime_error("checkpoint is not a single-net file");
  uint64_t seed = binio::read_u64(in);
  return {read_mlp(in), seed};
}

}  // namespace covote::nn
