#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "covote/nn.hpp"
#include "test_util.hpp"

using namespace covote;

namespace {

// independent re-computation of the two-layer forward map
std::vector<double> naive_forward(const nn::MlpParams& p, std::span<const double> x) {
  std::vector<double> h(static_cast<size_t>(p.hidden_dim()));
  for (int i = 0; i < p.hidden_dim(); ++i) {
    double s = p.b1[static_cast<size_t>(i)];
    for (int j = 0; j < p.in_dim(); ++j) s += p.w1.at(i, j) * x[static_cast<size_t>(j)];
    h[static_cast<size_t>(i)] = std::tanh(s);
  }
  std::vector<double> out(static_cast<size_t>(p.out_dim()));
  for (int o = 0; o < p.out_dim(); ++o) {
    double s = p.b2[static_cast<size_t>(o)];
    for (int i = 0; i < p.hidden_dim(); ++i) s += p.w2.at(o, i) * h[static_cast<size_t>(i)];
    out[static_cast<size_t>(o)] = s;
  }
  return out;
}

std::vector<double> random_vec(nn::Rng& rng, size_t n, double lo = -1, double hi = 1) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace

TEST_CASE("mlp_forward basics") {
  nn::MlpParams zero;
  zero.w1 = nn::DenseMatrix(4, 3);
  zero.b1.assign(4, 0.0);
  zero.w2 = nn::DenseMatrix(2, 4);
  zero.b2.assign(2, 0.0);
  std::vector<double> x{0.3, -0.7, 1.1}, hidden, out;
  nn::mlp_forward(zero, x, hidden, out);
  CHECK(out == std::vector<double>{0.0, 0.0});

  SUBCASE("identity layers fix zero") {
    nn::MlpParams id;
    id.w1 = nn::DenseMatrix(3, 3);
    id.w2 = nn::DenseMatrix(3, 3);
    for (int i = 0; i < 3; ++i) {
      id.w1.at(i, i) = 1.0;
      id.w2.at(i, i) = 1.0;
    }
    id.b1.assign(3, 0.0);
    id.b2.assign(3, 0.0);
    std::vector<double> zeros{0, 0, 0};
    nn::mlp_forward(id, zeros, hidden, out);
    CHECK(out == std::vector<double>{0.0, 0.0, 0.0});
  }
  SUBCASE("dimension mismatch") {
    std::vector<double> wrong{1.0};
    CHECK_THROWS(nn::mlp_forward(zero, wrong, hidden, out));
  }
}

TEST_CASE("mlp_forward matches an independent recomputation") {
  nn::Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = nn::init_params(3, 4, 2, nn::mix_seed(10, static_cast<uint64_t>(trial)));
    for (auto& b : p.b1) b = rng.uniform(-0.5, 0.5);
    for (auto& b : p.b2) b = rng.uniform(-0.5, 0.5);
    auto x = random_vec(rng, 3);
    std::vector<double> hidden, out;
    nn::mlp_forward(p, x, hidden, out);
    auto expect = naive_forward(p, x);
    for (size_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(expect[i]).epsilon(1e-12));
  }
}

TEST_CASE("mlp_backward zero upstream and scalar case") {
  auto p = nn::init_params(5, 8, 3, 1);
  nn::MlpGrads grads(p);
  nn::Rng rng(5);
  std::vector<double> x = random_vec(rng, 5);
  std::vector<double> hidden, out;
  nn::mlp_forward(p, x, hidden, out);
  std::vector<double> zero_up{0, 0, 0};
  nn::mlp_backward(p, x, hidden, zero_up, grads);
  for (double g : grads.w1.v) CHECK(g == 0.0);
  for (double g : grads.w2.v) CHECK(g == 0.0);

  // single-unit net out = w2 * tanh(w1 x): d out / d w2 = tanh(w1 x)
  nn::MlpParams tiny;
  tiny.w1 = nn::DenseMatrix(1, 1);
  tiny.w1.at(0, 0) = 0.7;
  tiny.b1.assign(1, 0.0);
  tiny.w2 = nn::DenseMatrix(1, 1);
  tiny.w2.at(0, 0) = 1.3;
  tiny.b2.assign(1, 0.0);
  std::vector<double> xin{0.9};
  nn::mlp_forward(tiny, xin, hidden, out);
  nn::MlpGrads tg(tiny);
  std::vector<double> up{1.0};
  nn::mlp_backward(tiny, xin, hidden, up, tg);
  CHECK(tg.w2.at(0, 0) == doctest::Approx(std::tanh(0.7 * 0.9)).epsilon(1e-14));
}

TEST_CASE("gradients match central finite differences over 100 random nets") {
  nn::Rng rng(2024);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int in = 1 + static_cast<int>(rng.below(5));
    const int hid = 1 + static_cast<int>(rng.below(6));
    const int out_dim = 1 + static_cast<int>(rng.below(4));
    auto p = nn::init_params(in, hid, out_dim, nn::mix_seed(7, static_cast<uint64_t>(trial)));
    auto x = random_vec(rng, static_cast<size_t>(in));
    auto upstream = random_vec(rng, static_cast<size_t>(out_dim));

    std::vector<double> hidden, out;
    nn::mlp_forward(p, x, hidden, out);
    nn::MlpGrads grads(p);
    nn::mlp_backward(p, x, hidden, upstream, grads);

    auto refs = nn::tensor_refs("mlp", p, grads);
    auto loss_fn = [&]() {
      std::vector<double> h, o;
      nn::mlp_forward(p, x, h, o);
      return std::inner_product(o.begin(), o.end(), upstream.begin(), 0.0);
    };
    auto result = nn::check_gradients(loss_fn, refs);
    worst = std::max(worst, result.max_rel_err);
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("input gradient matches finite differences") {
  nn::Rng rng(77);
  auto p = nn::init_params(5, 8, 3, 21);
  auto x = random_vec(rng, 5);
  auto upstream = random_vec(rng, 3);
  std::vector<double> hidden, out;
  nn::mlp_forward(p, x, hidden, out);
  nn::MlpGrads grads(p);
  std::vector<double> x_grad(5, 0.0);
  nn::mlp_backward(p, x, hidden, upstream, grads, &x_grad);

  const double h = 1e-5;
  for (size_t i = 0; i < x.size(); ++i) {
    auto eval = [&](double delta) {
      auto xx = x;
      xx[i] += delta;
      std::vector<double> hh, oo;
      nn::mlp_forward(p, xx, hh, oo);
      return std::inner_product(oo.begin(), oo.end(), upstream.begin(), 0.0);
    };
    const double numeric = (eval(h) - eval(-h)) / (2 * h);
    CHECK(x_grad[i] == doctest::Approx(numeric).epsilon(1e-6));
  }
}

TEST_CASE("softmax contract") {
  auto even = nn::softmax(std::vector<double>{0.0, 0.0});
  CHECK(even[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(even[1] == doctest::Approx(0.5).epsilon(1e-15));

  auto huge = nn::softmax(std::vector<double>{1000.0, 1000.0});
  CHECK(huge[0] == doctest::Approx(0.5).epsilon(1e-15));

  auto pair = nn::softmax(std::vector<double>{1.0, 0.0});
  CHECK(pair[0] == doctest::Approx(0.7310586).epsilon(1e-6));
  CHECK(pair[1] == doctest::Approx(0.2689414).epsilon(1e-6));

  nn::Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    auto logits = random_vec(rng, 1 + rng.below(7), -30, 30);
    auto probs = nn::softmax(logits);
    double sum = 0;
    for (double v : probs) {
      CHECK(v > 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);

    // shift invariance
    auto shifted = logits;
    for (auto& v : shifted) v += 123.456;
    auto probs2 = nn::softmax(shifted);
    for (size_t i = 0; i < probs.size(); ++i) {
      CHECK(probs[i] == doctest::Approx(probs2[i]).epsilon(1e-12));
    }

    // permutation equivariance: rotate inputs, outputs rotate along
    auto rotated = logits;
    std::rotate(rotated.begin(), rotated.begin() + 1, rotated.end());
    auto probs3 = nn::softmax(rotated);
    for (size_t i = 0; i + 1 < probs.size(); ++i) {
      CHECK(probs3[i] == doctest::Approx(probs[i + 1]).epsilon(1e-12));
    }
  }
}

TEST_CASE("cross entropy values and gradient") {
  std::vector<double> sure{1.0, 0.0};
  CHECK(nn::cross_entropy(sure, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(nn::cross_entropy(sure, 1) == doctest::Approx(-std::log(1e-12)));  // clamped

  std::vector<double> even{0.5, 0.5};
  CHECK(nn::cross_entropy(even, 0) == doctest::Approx(0.6931471805599453).epsilon(1e-12));
  CHECK_THROWS(nn::cross_entropy(even, 2));

  // gradient through softmax matches finite differences
  nn::Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto logits = random_vec(rng, 4, -2, 2);
    const int target = static_cast<int>(rng.below(4));
    auto probs = nn::softmax(logits);
    std::vector<double> grad(4);
    nn::cross_entropy_grad(probs, target, grad);
    const double h = 1e-5;
    for (size_t i = 0; i < logits.size(); ++i) {
      auto eval = [&](double delta) {
        auto ll = logits;
        ll[i] += delta;
        return nn::cross_entropy(nn::softmax(ll), target);
      };
      const double numeric = (eval(h) - eval(-h)) / (2 * h);
      const double denom = std::max({std::abs(grad[i]), std::abs(numeric), 1e-3});
      CHECK(std::abs(grad[i] - numeric) / denom < 1e-6);
    }
  }
}

TEST_CASE("adam fixed point and determinism") {
  auto p = nn::init_params(2, 3, 2, 5);
  auto p_copy = p;
  nn::AdamState state(p, 0.05);
  nn::MlpGrads zero(p);
  nn::adam_step(state, p, zero);
  CHECK(state.step == 1);
  CHECK(p.w1.v == p_copy.w1.v);  // zero gradient leaves parameters alone
  CHECK(p.b2 == p_copy.b2);

  nn::MlpGrads bad(p);
  bad.w1.at(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_WITH_AS(nn::adam_step(state, p, bad), "gradient overflow", std::runtime_error);

  // identical runs take identical trajectories, bit for bit
  auto run = [](uint64_t seed) {
    auto params = nn::init_params(3, 4, 2, seed);
    nn::AdamState st(params, 0.01);
    nn::Rng rng(seed + 1);
    for (int t = 0; t < 25; ++t) {
      nn::MlpGrads g(params);
      for (auto& v : g.w1.v) v = rng.uniform(-1, 1);
      for (auto& v : g.w2.v) v = rng.uniform(-1, 1);
      nn::adam_step(st, params, g);
    }
    return params;
  };
  auto a = run(9), b = run(9);
  CHECK(a.w1.v == b.w1.v);
  CHECK(a.w2.v == b.w2.v);
}

TEST_CASE("adam matches a hand-evaluated scalar recurrence for three steps") {
  // one relevant parameter: a 1x1x1 net, gradient applied to w1 only
  nn::MlpParams p;
  p.w1 = nn::DenseMatrix(1, 1);
  p.w1.at(0, 0) = 0.4;
  p.b1.assign(1, 0.0);
  p.w2 = nn::DenseMatrix(1, 1);
  p.b2.assign(1, 0.0);
  const double lr = 0.1;
  nn::AdamState state(p, lr);

  const double gs[3] = {0.8, -0.3, 0.05};
  double x = 0.4, em = 0.0, ev = 0.0;
  for (int t = 1; t <= 3; ++t) {
    nn::MlpGrads g(p);
    g.w1.at(0, 0) = gs[t - 1];
    nn::adam_step(state, p, g);

    // hand recurrence
    em = 0.9 * em + (1.0 - 0.9) * gs[t - 1];
    ev = 0.999 * ev + (1.0 - 0.999) * gs[t - 1] * gs[t - 1];
    const double mhat = em / (1.0 - std::pow(0.9, t));
    const double vhat = ev / (1.0 - std::pow(0.999, t));
    x -= lr * mhat / (std::sqrt(vhat) + 1e-8);
    CHECK(p.w1.at(0, 0) == doctest::Approx(x).epsilon(1e-15));
  }

  // first-step direction is -lr * sign(g) up to epsilon
  nn::MlpParams q;
  q.w1 = nn::DenseMatrix(1, 1);
  q.w1.at(0, 0) = 2.0;
  q.b1.assign(1, 0.0);
  q.w2 = nn::DenseMatrix(1, 1);
  q.b2.assign(1, 0.0);
  nn::AdamState st2(q, 0.02);
  nn::MlpGrads g(q);
  g.w1.at(0, 0) = -0.37;
  nn::adam_step(st2, q, g);
  CHECK(q.w1.at(0, 0) == doctest::Approx(2.0 + 0.02).epsilon(1e-6));
}

TEST_CASE("init_params is seeded, bounded and shaped") {
  auto a = nn::init_params(10, 128, 4, 42);
  auto b = nn::init_params(10, 128, 4, 42);
  CHECK(a.w1.v == b.w1.v);
  CHECK(a.w2.v == b.w2.v);
  CHECK(a.w1.rows == 128);
  CHECK(a.w1.cols == 10);
  CHECK(a.w2.rows == 4);

  auto c = nn::init_params(10, 128, 4, 43);
  CHECK(a.w1.v != c.w1.v);

  const double bound1 = std::sqrt(6.0 / (10 + 128));
  for (double w : a.w1.v) CHECK(std::abs(w) <= bound1);
  const double bound2 = std::sqrt(6.0 / (128 + 4));
  for (double w : a.w2.v) CHECK(std::abs(w) <= bound2);
  for (double bias : a.b1) CHECK(bias == 0.0);
}

TEST_CASE("single-net checkpoint round-trips byte for byte") {
  testutil::TempDir tmp("ckpt");
  auto p = nn::init_params(6, 9, 3, 123);
  nn::save_mlp_file(tmp.file("net.bin").string(), p, 123);
  auto [loaded, seed] = nn::load_mlp_file(tmp.file("net.bin").string());
  CHECK(seed == 123);
  CHECK(loaded.w1.v == p.w1.v);
  CHECK(loaded.b2 == p.b2);
  nn::save_mlp_file(tmp.file("net2.bin").string(), loaded, seed);
  CHECK(testutil::read_file(tmp.file("net.bin")) == testutil::read_file(tmp.file("net2.bin")));
}
