// Times the serial reference kernels against the OpenMP variants on a
// synthetic corpus and reports the speedup. Not part of the test suite.
//
//   covote_bench [n] [d] [k] [hidden]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "covote/cotrain.hpp"
#include "covote/kernels.hpp"

using namespace covote;

namespace {

struct Setup {
  EmbeddingMatrix embeddings;
  WeakLabelMatrix weak;
  std::vector<int64_t> rows;
  std::vector<int> targets;
  nn::DenseMatrix selftrain_targets;
  nn::MlpParams attention;
  nn::MlpParams classifier;
  int m = 4;
};

Setup make_setup(int64_t n, int d, int k, int hidden) {
  Setup s;
  nn::Rng rng(7);
  s.embeddings.n = static_cast<uint32_t>(n);
  s.embeddings.d = static_cast<uint32_t>(d);
  s.embeddings.values.resize(static_cast<size_t>(n) * d);
  for (auto& v : s.embeddings.values) v = static_cast<float>(rng.uniform(-1, 1));

  s.weak.n = n;
  s.weak.k = k;
  s.weak.votes.resize(static_cast<size_t>(n) * k);
  for (auto& v : s.weak.votes) {
    v = rng.uniform() < 0.5 ? -1 : static_cast<int32_t>(rng.below(static_cast<uint64_t>(s.m)));
  }
  for (int64_t i = 0; i < n; ++i) {
    s.rows.push_back(i);
    s.targets.push_back(static_cast<int>(rng.below(static_cast<uint64_t>(s.m))));
  }
  s.selftrain_targets = nn::DenseMatrix(static_cast<int>(n), s.m);
  for (auto& v : s.selftrain_targets.v) v = 1.0 / s.m;

  s.attention = nn::init_params(d, hidden, 1, 11);
  s.classifier = nn::init_params(d, hidden, s.m, 12);
  return s;
}

template <typename F>
double time_ms(F&& fn, int reps) {
  auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn();
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-22s serial %9.2f ms   parallel %9.2f ms   speedup %.2fx\n", name, serial_ms,
              parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main(int argc, char** argv) {
  const int64_t n = argc > 1 ? std::atoll(argv[1]) : 8000;
  const int d = argc > 2 ? std::atoi(argv[2]) : 128;
  const int k = argc > 3 ? std::atoi(argv[3]) : 8;
  const int hidden = argc > 4 ? std::atoi(argv[4]) : 128;
  std::printf("n=%lld d=%d k=%d hidden=%d m=4\n", static_cast<long long>(n), d, k, hidden);

  Setup s = make_setup(n, d, k, hidden);
  const int reps = 3;

  {
    auto run = [&](ExecBackend b) {
      return kernels::denoiser_pass(b, s.attention, s.embeddings, s.weak, s.rows, s.targets, s.m,
                                    true)
          .loss;
    };
    double ser = time_ms([&] { run(ExecBackend::kSerial); }, reps);
    double par = time_ms([&] { run(ExecBackend::kParallel); }, reps);
    report("denoiser_pass", ser, par);
  }
  {
    nn::DenseMatrix probs;
    double ser = time_ms(
        [&] { kernels::classifier_probs(ExecBackend::kSerial, s.classifier, s.embeddings, s.rows, probs); },
        reps);
    double par = time_ms(
        [&] { kernels::classifier_probs(ExecBackend::kParallel, s.classifier, s.embeddings, s.rows, probs); },
        reps);
    report("classifier_probs", ser, par);
  }
  {
    auto run = [&](ExecBackend b) {
      nn::MlpGrads g(s.classifier);
      return kernels::supervised_backward(b, s.classifier, s.embeddings, s.rows, s.targets, g);
    };
    double ser = time_ms([&] { run(ExecBackend::kSerial); }, reps);
    double par = time_ms([&] { run(ExecBackend::kParallel); }, reps);
    report("supervised_backward", ser, par);
  }
  {
    auto run = [&](ExecBackend b) {
      nn::MlpGrads g(s.classifier);
      return kernels::selftrain_backward(b, s.classifier, s.embeddings, s.rows,
                                         s.selftrain_targets, g);
    };
    double ser = time_ms([&] { run(ExecBackend::kSerial); }, reps);
    double par = time_ms([&] { run(ExecBackend::kParallel); }, reps);
    report("selftrain_backward", ser, par);
  }
  return 0;
}
