#pragma once

// Co-training loop: the label denoiser and the neural classifier supervise
// each other through three losses (denoiser NLL on matched samples,
// classifier NLL on matched samples, temporal-ensembling self-training on
// unmatched samples), with per-epoch pseudo-label renewal, dev-based early
// stopping, clean-label pinning, ablation modes and confidence-based
// ensemble inference.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "covote/classifier.hpp"
#include "covote/corpus.hpp"
#include "covote/denoiser.hpp"
#include "covote/kernels.hpp"
#include "covote/nn.hpp"
#include "covote/rules.hpp"

namespace covote {

enum class TrainMode { kFull, kRuleOnly, kNeuralOnly, kNeuralSelf, kRuleNeural };

const char* mode_name(TrainMode mode);
std::optional<TrainMode> parse_mode(const std::string& name);

struct TrainConfig {
  double c1 = 0.2;
  double c2 = 0.7;
  double c3 = 0.1;
  double alpha = 0.6;  // ensembling momentum
  double lr = 0.02;
  int hidden = 128;
  int max_epochs = 500;
  int patience = 50;  // epochs without dev improvement before stopping
  // matched means more than threshold_p votes; default 1 so every matched
  // row carries at least two votes and majority targets are meaningful
  int threshold_p = 1;
  uint64_t seed = 1;
  TrainMode mode = TrainMode::kFull;
  double clean_fraction = 0.0;
  ExecBackend backend = ExecBackend::kParallel;

  void validate() const;

  // loss weights with the mode's excluded terms zeroed and the remaining
  // weights renormalized to sum 1
  std::array<double, 3> mode_weights() const;

  // pseudo labels are renewed each epoch only when the denoiser drives
  // them; the other ablations stay supervised by the initial majority vote
  bool renews_pseudo_labels() const;
};

struct EnsembleState {
  nn::DenseMatrix z;  // accumulated classifier outputs, one row per sample
  long t = 0;         // epochs accumulated
};

// z <- alpha z + (1-alpha) outputs; t <- t+1; returns the bias-corrected
// targets p = z / (1 - alpha^t)
nn::DenseMatrix ensemble_update(EnsembleState& state, const nn::DenseMatrix& outputs,
                                double alpha);

// sums of -log prob[label], probabilities clamped at 1e-12
double loss_denoiser(const nn::DenseMatrix& rule_probs, std::span<const int> labels);
double loss_classifier(const nn::DenseMatrix& probs, std::span<const int> labels);
// sum over rows of squared Euclidean distance
double loss_selftrain(const nn::DenseMatrix& probs, const nn::DenseMatrix& targets);
double total_loss(double l1, double l2, double l3, const TrainConfig& config);

struct EpochRecord {
  int epoch = 0;
  double l1 = 0, l2 = 0, l3 = 0, total = 0;
  double dev_acc = 0;      // NaN when the dev split has no gold labels
  double train_noise = 0;  // pseudo-label error on matched train; NaN without gold
};

enum class PseudoProvenance { kMajorityInit, kWeighted };

struct TrainedModel {
  AttentionNet attention;
  NeuralClassifier classifier;
  std::vector<double> reliability;                     // global A, one entry per source
  std::vector<std::string> source_names;               // defaults source_<j>
  std::vector<std::pair<int64_t, int>> pseudo_labels;  // matched train row -> label
  PseudoProvenance pseudo_provenance = PseudoProvenance::kMajorityInit;
  TrainConfig config;
  int class_count = 0;
  int best_epoch = 0;
  std::vector<EpochRecord> log;  // not part of the checkpoint
};

TrainedModel train(std::span<const Document> docs, const EmbeddingMatrix& embeddings,
                   const WeakLabelMatrix& weak, int class_count, const TrainConfig& config);

struct Prediction {
  enum class Origin { kDenoiser, kClassifier };
  int label = 0;
  double confidence = 0;
  Origin origin = Origin::kClassifier;
};

// Ensemble inference: denoiser and classifier each predict; agreement
// keeps the class with the larger confidence, conflicts resolve toward
// the more confident head, vote-free rows fall back to the classifier.
// Ablation modes that trained a single head predict with that head only.
Prediction predict(const TrainedModel& model, std::span<const float> embedding,
                   std::span<const int32_t> weak_row);

struct BucketStat {
  int votes = 0;
  int64_t count = 0;
  double accuracy = 0;
};

struct Metrics {
  double accuracy = 0;
  int64_t evaluated = 0;
  double majority_noise = 0;  // on matched train samples; NaN without gold
  double denoised_noise = 0;
  std::vector<BucketStat> buckets;  // split accuracy by number of voting rules
};

Metrics evaluate(const TrainedModel& model, std::span<const Document> docs, Split split,
                 const EmbeddingMatrix& embeddings, const WeakLabelMatrix& weak);

// Checkpoint: magic "WSM1", kind 2, config echo, both nets, source names,
// reliability vector and pseudo labels. save(load(f)) is byte-identical.
void save_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

// UTF-8 lines "epoch<TAB>l1<TAB>l2<TAB>l3<TAB>total<TAB>dev_acc"
void write_train_log(const std::filesystem::path& path, std::span<const EpochRecord> log);

}  // namespace covote
