#include "covote/gradcheck.hpp"

#include <vector>

#include "covote/cotrain.hpp"
#include "covote/kernels.hpp"

namespace covote {

namespace {

constexpr int kN = 6, kK = 3, kM = 2, kD = 4, kHidden = 5;

struct MicroInstance {
  EmbeddingMatrix embeddings;
  WeakLabelMatrix weak;
  std::vector<int64_t> rows;
  std::vector<int> targets_prev;   // supervises the denoiser loss
  std::vector<int> targets_new;    // supervises the classifier loss
  nn::DenseMatrix selftrain_targets;
  nn::MlpParams attention;
  nn::MlpParams classifier;
};

MicroInstance make_instance(uint64_t seed) {
  nn::Rng rng(seed);
  MicroInstance inst;
  inst.embeddings.n = kN;
  inst.embeddings.d = kD;
  inst.embeddings.values.resize(kN * kD);
  for (auto& v : inst.embeddings.values) v = static_cast<float>(rng.uniform(-1.0, 1.0));

  inst.weak.n = kN;
  inst.weak.k = kK;
  inst.weak.votes.resize(kN * kK);
  for (int i = 0; i < kN; ++i) {
    bool any = false;
    for (int j = 0; j < kK; ++j) {
      int32_t v = rng.uniform() < 0.3 ? -1 : static_cast<int32_t>(rng.below(kM));
      inst.weak.votes[static_cast<size_t>(i) * kK + j] = v;
      any = any || v >= 0;
    }
    if (!any) {
      inst.weak.votes[static_cast<size_t>(i) * kK + static_cast<size_t>(rng.below(kK))] =
          static_cast<int32_t>(rng.below(kM));
    }
    inst.rows.push_back(i);
    inst.targets_prev.push_back(static_cast<int>(rng.below(kM)));
    inst.targets_new.push_back(static_cast<int>(rng.below(kM)));
  }

  inst.selftrain_targets = nn::DenseMatrix(kN, kM);
  for (int i = 0; i < kN; ++i) {
    auto row = inst.selftrain_targets.row(i);
    for (auto& v : row) v = rng.uniform(-1.0, 1.0);
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double sum = 0;
    for (auto& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (auto& v : row) v /= sum;
  }

  inst.attention = nn::init_params(kD, kHidden, 1, nn::mix_seed(seed, 11));
  inst.classifier = nn::init_params(kD, kHidden, kM, nn::mix_seed(seed, 12));
  return inst;
}

void maybe_corrupt(std::vector<nn::TensorRef>& refs, const std::string& corrupt,
                   std::vector<double>& corrupted_storage) {
  if (corrupt.empty()) return;
  for (auto& ref : refs) {
    if (ref.name == corrupt) {
      corrupted_storage.assign(ref.grads.begin(), ref.grads.end());
      for (auto& g : corrupted_storage) g += 1e-2;
      ref.grads = corrupted_storage;
      return;
    }
  }
}

void merge(GradCheckReport& report, const nn::GradCheckResult& result, const std::string& where) {
  if (result.max_rel_err > report.worst_rel_err) {
    report.worst_rel_err = result.max_rel_err;
    report.worst_case = where + ": " + result.worst;
  }
}

}  // namespace

GradCheckReport run_gradcheck_suite(uint64_t seed, int trials, const std::string& corrupt_tensor) {
  GradCheckReport report;
  report.trials = trials;
  const auto backend = ExecBackend::kSerial;
  std::vector<double> corrupted;

  for (int trial = 0; trial < trials; ++trial) {
    MicroInstance inst = make_instance(nn::mix_seed(seed, static_cast<uint64_t>(trial) + 100));
    const std::string tag = " trial " + std::to_string(trial);

    {  // attention path: votes + embeddings -> scores -> rule prediction -> l1
      auto pass = kernels::denoiser_pass(backend, inst.attention, inst.embeddings, inst.weak,
                                         inst.rows, inst.targets_prev, kM, true);
      auto refs = nn::tensor_refs("attention", inst.attention, pass.grads);
      maybe_corrupt(refs, corrupt_tensor, corrupted);
      auto loss_fn = [&]() {
        return kernels::denoiser_pass(backend, inst.attention, inst.embeddings, inst.weak,
                                      inst.rows, inst.targets_prev, kM, false)
            .loss;
      };
      merge(report, nn::check_gradients(loss_fn, refs), "attention-path" + tag);
    }

    {  // classifier path: embeddings -> softmax -> l2
      nn::MlpGrads grads(inst.classifier);
      kernels::supervised_backward(backend, inst.classifier, inst.embeddings, inst.rows,
                                   inst.targets_new, grads);
      auto refs = nn::tensor_refs("classifier", inst.classifier, grads);
      maybe_corrupt(refs, corrupt_tensor, corrupted);
      auto loss_fn = [&]() {
        nn::DenseMatrix probs;
        kernels::classifier_probs(backend, inst.classifier, inst.embeddings, inst.rows, probs);
        return loss_classifier(probs, inst.targets_new);
      };
      merge(report, nn::check_gradients(loss_fn, refs), "classifier-path" + tag);
    }

    {  // self-training path: embeddings -> softmax -> squared distance to fixed targets
      nn::MlpGrads grads(inst.classifier);
      kernels::selftrain_backward(backend, inst.classifier, inst.embeddings, inst.rows,
                                  inst.selftrain_targets, grads);
      auto refs = nn::tensor_refs("classifier", inst.classifier, grads);
      maybe_corrupt(refs, corrupt_tensor, corrupted);
      auto loss_fn = [&]() {
        nn::DenseMatrix probs;
        kernels::classifier_probs(backend, inst.classifier, inst.embeddings, inst.rows, probs);
        return loss_selftrain(probs, inst.selftrain_targets);
      };
      merge(report, nn::check_gradients(loss_fn, refs), "selftrain-path" + tag);
    }

    {  // joint objective with the default weights, targets held fixed
      const double w1 = 0.2, w2 = 0.7, w3 = 0.1;
      auto pass = kernels::denoiser_pass(backend, inst.attention, inst.embeddings, inst.weak,
                                         inst.rows, inst.targets_prev, kM, true);
      pass.grads.scale(w1);
      nn::MlpGrads cls(inst.classifier);
      nn::MlpGrads g2(inst.classifier);
      kernels::supervised_backward(backend, inst.classifier, inst.embeddings, inst.rows,
                                   inst.targets_new, g2);
      cls.add_scaled(g2, w2);
      nn::MlpGrads g3(inst.classifier);
      kernels::selftrain_backward(backend, inst.classifier, inst.embeddings, inst.rows,
                                  inst.selftrain_targets, g3);
      cls.add_scaled(g3, w3);

      auto refs = nn::tensor_refs("attention", inst.attention, pass.grads);
      auto cls_refs = nn::tensor_refs("classifier", inst.classifier, cls);
      refs.insert(refs.end(), cls_refs.begin(), cls_refs.end());
      maybe_corrupt(refs, corrupt_tensor, corrupted);
      auto loss_fn = [&]() {
        const double l1 = kernels::denoiser_pass(backend, inst.attention, inst.embeddings,
                                                 inst.weak, inst.rows, inst.targets_prev, kM, false)
                              .loss;
        nn::DenseMatrix probs;
        kernels::classifier_probs(backend, inst.classifier, inst.embeddings, inst.rows, probs);
        const double l2 = loss_classifier(probs, inst.targets_new);
        const double l3 = loss_selftrain(probs, inst.selftrain_targets);
        return w1 * l1 + w2 * l2 + w3 * l3;
      };
      merge(report, nn::check_gradients(loss_fn, refs), "joint-objective" + tag);
    }
  }

  report.pass = report.worst_rel_err < report.tolerance;
  return report;
}

}  // namespace covote
