#include "covote/cotrain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include "covote/binio.hpp"

namespace covote {

const char* mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::kFull: return "full";
    case TrainMode::kRuleOnly: return "rule-only";
    case TrainMode::kNeuralOnly: return "neural-only";
    case TrainMode::kNeuralSelf: return "neural-self";
    case TrainMode::kRuleNeural: return "rule-neural";
  }
  return "?";
}

std::optional<TrainMode> parse_mode(const std::string& name) {
  if (name == "full") return TrainMode::kFull;
  if (name == "rule-only" || name == "rule_only") return TrainMode::kRuleOnly;
  if (name == "neural-only" || name == "neural_only") return TrainMode::kNeuralOnly;
  if (name == "neural-self" || name == "neural_self") return TrainMode::kNeuralSelf;
  if (name == "rule-neural" || name == "rule_neural") return TrainMode::kRuleNeural;
  return std::nullopt;
}

void TrainConfig::validate() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(c1) || !in_unit(c2) || !in_unit(c3)) {
    throw std::runtime_error("loss weights must lie in [0, 1]");
  }
  if (std::abs(c1 + c2 + c3 - 1.0) > 1e-9) {
    throw std::runtime_error("loss weights must sum to 1");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::runtime_error("ensembling momentum alpha must lie in (0, 1)");
  }
  if (!(lr > 0.0)) throw std::runtime_error("learning rate must be positive");
  if (hidden <= 0) throw std::runtime_error("hidden width must be positive");
  if (max_epochs < 1) throw std::runtime_error("max epochs must be at least 1");
  if (patience < 1) throw std::runtime_error("patience must be at least 1");
  if (threshold_p < 0) throw std::runtime_error("threshold p must be nonnegative");
  if (!in_unit(clean_fraction)) throw std::runtime_error("clean fraction must lie in [0, 1]");
}

std::array<double, 3> TrainConfig::mode_weights() const {
  switch (mode) {
    case TrainMode::kFull: return {c1, c2, c3};
    case TrainMode::kRuleOnly: return {1.0, 0.0, 0.0};
    case TrainMode::kNeuralOnly: return {0.0, 1.0, 0.0};
    case TrainMode::kNeuralSelf: {
      const double denom = c2 + c3;
      if (denom <= 0) throw std::runtime_error("neural-self needs c2 + c3 > 0");
      return {0.0, c2 / denom, c3 / denom};
    }
    case TrainMode::kRuleNeural: {
      const double denom = c1 + c2;
      if (denom <= 0) throw std::runtime_error("rule-neural needs c1 + c2 > 0");
      return {c1 / denom, c2 / denom, 0.0};
    }
  }
  return {c1, c2, c3};
}

bool TrainConfig::renews_pseudo_labels() const {
  return mode == TrainMode::kFull || mode == TrainMode::kRuleOnly;
}

nn::DenseMatrix ensemble_update(EnsembleState& state, const nn::DenseMatrix& outputs,
                                double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::runtime_error("ensembling momentum alpha must lie in (0, 1)");
  }
  if (state.t == 0 && state.z.rows == 0 && state.z.cols == 0) {
    state.z = nn::DenseMatrix(outputs.rows, outputs.cols);
  }
  if (state.z.rows != outputs.rows || state.z.cols != outputs.cols) {
    throw std::runtime_error("ensemble_update: shape mismatch");
  }
  for (size_t i = 0; i < state.z.v.size(); ++i) {
    state.z.v[i] = alpha * state.z.v[i] + (1.0 - alpha) * outputs.v[i];
  }
  state.t += 1;
  const double corr = 1.0 - std::pow(alpha, static_cast<double>(state.t));
  nn::DenseMatrix targets(outputs.rows, outputs.cols);
  for (size_t i = 0; i < targets.v.size(); ++i) targets.v[i] = state.z.v[i] / corr;
  return targets;
}

static double nll_sum(const nn::DenseMatrix& probs, std::span<const int> labels) {
  if (probs.rows == 0) throw std::runtime_error("empty matched set");
  if (probs.rows != static_cast<int>(labels.size())) {
    throw std::runtime_error("label count does not match probability rows");
  }
  double sum = 0;
  for (int i = 0; i < probs.rows; ++i) {
    const int y = labels[static_cast<size_t>(i)];
    if (y < 0 || y >= probs.cols) throw std::runtime_error("label out of range");
    sum += -std::log(std::max(probs.at(i, y), 1e-12));
  }
  return sum;
}

double loss_denoiser(const nn::DenseMatrix& rule_probs, std::span<const int> labels) {
  return nll_sum(rule_probs, labels);
}

double loss_classifier(const nn::DenseMatrix& probs, std::span<const int> labels) {
  return nll_sum(probs, labels);
}

double loss_selftrain(const nn::DenseMatrix& probs, const nn::DenseMatrix& targets) {
  if (probs.rows != targets.rows || probs.cols != targets.cols) {
    throw std::runtime_error("loss_selftrain: shape mismatch");
  }
  double sum = 0;
  for (size_t i = 0; i < probs.v.size(); ++i) {
    const double diff = probs.v[i] - targets.v[i];
    sum += diff * diff;
  }
  return sum;
}

double total_loss(double l1, double l2, double l3, const TrainConfig& config) {
  config.validate();
  const auto w = config.mode_weights();
  return w[0] * l1 + w[1] * l2 + w[2] * l3;
}

namespace {

struct Heads {
  const AttentionNet* attention = nullptr;   // null when the mode never trained it
  const NeuralClassifier* classifier = nullptr;
};

Heads mode_heads(const TrainedModel& model) {
  Heads h;
  if (model.config.mode != TrainMode::kNeuralOnly && model.config.mode != TrainMode::kNeuralSelf) {
    h.attention = &model.attention;
  }
  if (model.config.mode != TrainMode::kRuleOnly) h.classifier = &model.classifier;
  return h;
}

Prediction predict_row(const Heads& heads, std::span<const float> embedding,
                       std::span<const int32_t> row, int m) {
  bool has_votes = false;
  for (int32_t v : row) {
    if (v >= 0) {
      has_votes = true;
      break;
    }
  }

  std::optional<std::pair<int, double>> rule_pred;
  if (heads.attention && has_votes) {
    auto q = attention_scores(*heads.attention, embedding, row);
    auto a = conditional_reliability(q, row);
    auto zhat = rule_prediction(row, a, m);
    rule_pred = confidence(zhat);
  }
  std::optional<std::pair<int, double>> cls_pred;
  if (heads.classifier) {
    cls_pred = confidence(classify(*heads.classifier, embedding));
  }

  Prediction out;
  if (rule_pred && cls_pred) {
    // agreement keeps the class either way; otherwise the more confident
    // head wins, the classifier on exact ties
    if (cls_pred->second >= rule_pred->second) {
      out = {cls_pred->first, cls_pred->second, Prediction::Origin::kClassifier};
    } else {
      out = {rule_pred->first, rule_pred->second, Prediction::Origin::kDenoiser};
    }
    if (rule_pred->first == cls_pred->first) {
      out.label = cls_pred->first;
      out.confidence = std::max(cls_pred->second, rule_pred->second);
    }
  } else if (cls_pred) {
    out = {cls_pred->first, cls_pred->second, Prediction::Origin::kClassifier};
  } else if (rule_pred) {
    out = {rule_pred->first, rule_pred->second, Prediction::Origin::kDenoiser};
  } else {
    // rule-only mode on a vote-free row: uniform rule prediction
    out = {0, 1.0 / static_cast<double>(m), Prediction::Origin::kDenoiser};
  }
  return out;
}

// accuracy over the given rows; parallel per-row evaluation with a fixed
// fold order keeps results identical across backends and thread counts
double accuracy_over(const Heads& heads, std::span<const Document> docs,
                     const EmbeddingMatrix& embeddings, const WeakLabelMatrix& weak,
                     std::span<const int64_t> rows, int m, ExecBackend backend) {
  const int64_t n = static_cast<int64_t>(rows.size());
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  std::vector<unsigned char> correct(static_cast<size_t>(n), 0);
  if (backend == ExecBackend::kParallel) {
#pragma omp parallel for schedule(static)
    for (int64_t p = 0; p < n; ++p) {
      const int64_t i = rows[static_cast<size_t>(p)];
      Prediction pr = predict_row(heads, embeddings.row(static_cast<size_t>(i)), weak.row(i), m);
      correct[static_cast<size_t>(p)] =
          pr.label == *docs[static_cast<size_t>(i)].gold_label ? 1 : 0;
    }
  } else {
    for (int64_t p = 0; p < n; ++p) {
      const int64_t i = rows[static_cast<size_t>(p)];
      Prediction pr = predict_row(heads, embeddings.row(static_cast<size_t>(i)), weak.row(i), m);
      correct[static_cast<size_t>(p)] =
          pr.label == *docs[static_cast<size_t>(i)].gold_label ? 1 : 0;
    }
  }
  int64_t hits = 0;
  for (unsigned char c : correct) hits += c;
  return static_cast<double>(hits) / static_cast<double>(n);
}

// early stopping restores network parameters only; the reliability vector
// and pseudo labels stay at their final-epoch state (the denoiser's
// self-denoising artifacts keep refining past the best classifier epoch)
struct Snapshot {
  nn::MlpParams attention;
  nn::MlpParams classifier;
  int epoch = 0;
};

}  // namespace

TrainedModel train(std::span<const Document> docs, const EmbeddingMatrix& embeddings,
                   const WeakLabelMatrix& weak, int class_count, const TrainConfig& config) {
  config.validate();
  if (class_count < 2) throw std::runtime_error("need at least two classes");
  if (static_cast<int64_t>(docs.size()) != weak.n ||
      static_cast<uint32_t>(docs.size()) != embeddings.n) {
    throw std::runtime_error("corpus, embeddings and weak matrix sizes disagree");
  }
  const int m = class_count;

  // D_L / D_U are train-split documents only
  MatchPartition part = partition_matched(weak, config.threshold_p);
  std::vector<int64_t> matched, unmatched;
  for (int64_t i : part.matched) {
    if (docs[static_cast<size_t>(i)].split == Split::kTrain) matched.push_back(i);
  }
  for (int64_t i : part.unmatched) {
    if (docs[static_cast<size_t>(i)].split == Split::kTrain) unmatched.push_back(i);
  }
  if (matched.empty()) throw std::runtime_error("no matched training samples (empty D_L)");

  TrainedModel model;
  model.config = config;
  model.class_count = m;
  model.attention.mlp =
      nn::init_params(static_cast<int>(embeddings.d), config.hidden, 1, nn::mix_seed(config.seed, 1));
  model.classifier.mlp =
      nn::init_params(static_cast<int>(embeddings.d), config.hidden, m, nn::mix_seed(config.seed, 2));
  model.source_names.resize(static_cast<size_t>(weak.k));
  for (int j = 0; j < weak.k; ++j) model.source_names[static_cast<size_t>(j)] = "source_" + std::to_string(j);

  // initial pseudo labels by simple majority voting
  const size_t n_l = matched.size();
  std::vector<int> pseudo(n_l);
  for (size_t p = 0; p < n_l; ++p) pseudo[p] = majority_vote(weak.row(matched[p]), m);

  // clean-label pinning: a seeded sample of matched train docs with gold
  // labels keeps its gold label for every epoch
  std::vector<char> pinned(n_l, 0);
  if (config.clean_fraction > 0) {
    std::vector<size_t> candidates;
    for (size_t p = 0; p < n_l; ++p) {
      if (docs[static_cast<size_t>(matched[p])].gold_label) candidates.push_back(p);
    }
    nn::Rng rng(nn::mix_seed(config.seed, 3));
    for (size_t i = candidates.size(); i > 1; --i) {
      std::swap(candidates[i - 1], candidates[static_cast<size_t>(rng.below(i))]);
    }
    const size_t take = static_cast<size_t>(
        std::floor(config.clean_fraction * static_cast<double>(candidates.size()) + 1e-9));
    for (size_t i = 0; i < take; ++i) {
      pinned[candidates[i]] = 1;
      pseudo[candidates[i]] = *docs[static_cast<size_t>(matched[candidates[i]])].gold_label;
    }
  }

  const auto weights = config.mode_weights();
  const bool use_l1 = weights[0] > 0;
  const bool use_l2 = weights[1] > 0;
  const bool use_l3 = weights[2] > 0;

  nn::AdamState adam_att(model.attention.mlp, config.lr);
  nn::AdamState adam_cls(model.classifier.mlp, config.lr);
  EnsembleState ensemble;

  std::vector<int64_t> dev_rows;
  for (size_t i = 0; i < docs.size(); ++i) {
    if (docs[i].split == Split::kDev && docs[i].gold_label) {
      dev_rows.push_back(static_cast<int64_t>(i));
    }
  }

  std::vector<char> gold_on_matched(n_l, 0);
  int64_t gold_count = 0;
  for (size_t p = 0; p < n_l; ++p) {
    if (docs[static_cast<size_t>(matched[p])].gold_label) {
      gold_on_matched[p] = 1;
      ++gold_count;
    }
  }

  std::vector<int> pseudo_prev = pseudo;
  Snapshot best;
  double best_acc = -1.0;
  int epochs_since_best = 0;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  Heads heads;
  heads.attention = use_l1 ? &model.attention : nullptr;
  if (config.mode != TrainMode::kRuleOnly) heads.classifier = &model.classifier;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    double l1 = 0, l2 = 0, l3 = 0;
    std::vector<double> reliability = model.reliability;

    kernels::DenoiserPass pass;
    if (use_l1) {
      pass = kernels::denoiser_pass(config.backend, model.attention.mlp, embeddings, weak, matched,
                                    pseudo_prev, m, /*want_grads=*/true);
      l1 = pass.loss;
      reliability = global_reliability(pass.conditional);
      if (config.renews_pseudo_labels()) {
        for (size_t p = 0; p < n_l; ++p) {
          if (!pinned[p]) pseudo[p] = weighted_vote(weak.row(matched[p]), reliability, m);
        }
      }
    }

    nn::MlpGrads cls_grads(model.classifier.mlp);
    bool cls_touched = false;
    if (use_l2) {
      nn::MlpGrads g2(model.classifier.mlp);
      l2 = kernels::supervised_backward(config.backend, model.classifier.mlp, embeddings, matched,
                                        pseudo, g2);
      cls_grads.add_scaled(g2, weights[1]);
      cls_touched = true;
    }
    if (use_l3) {
      nn::DenseMatrix ztilde_u;
      kernels::classifier_probs(config.backend, model.classifier.mlp, embeddings, unmatched,
                                ztilde_u);
      nn::DenseMatrix targets = ensemble_update(ensemble, ztilde_u, config.alpha);
      nn::MlpGrads g3(model.classifier.mlp);
      l3 = kernels::selftrain_backward(config.backend, model.classifier.mlp, embeddings, unmatched,
                                       targets, g3);
      cls_grads.add_scaled(g3, weights[2]);
      cls_touched = true;
    }

    const double total = weights[0] * l1 + weights[1] * l2 + weights[2] * l3;
    if (!std::isfinite(total)) throw std::runtime_error("non-finite loss");

    if (use_l1) {
      pass.grads.scale(weights[0]);
      nn::adam_step(adam_att, model.attention.mlp, pass.grads);
    }
    if (cls_touched) nn::adam_step(adam_cls, model.classifier.mlp, cls_grads);

    double dev_acc = nan;
    if (!dev_rows.empty()) {
      dev_acc = accuracy_over(heads, docs, embeddings, weak, dev_rows, m, config.backend);
    }

    double train_noise = nan;
    if (gold_count > 0) {
      int64_t wrong = 0;
      for (size_t p = 0; p < n_l; ++p) {
        if (gold_on_matched[p] && pseudo[p] != *docs[static_cast<size_t>(matched[p])].gold_label) {
          ++wrong;
        }
      }
      train_noise = static_cast<double>(wrong) / static_cast<double>(gold_count);
    }

    model.reliability = reliability;
    model.log.push_back({epoch, l1, l2, l3, total, dev_acc, train_noise});

    const bool improved = dev_rows.empty() || dev_acc > best_acc;
    if (improved) {
      best_acc = dev_rows.empty() ? best_acc : dev_acc;
      best = Snapshot{model.attention.mlp, model.classifier.mlp, epoch};
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= config.patience) break;
    }
    pseudo_prev = pseudo;
  }

  model.attention.mlp = std::move(best.attention);
  model.classifier.mlp = std::move(best.classifier);
  model.best_epoch = best.epoch;

  if (!use_l1) {
    // modes without the denoiser loss never computed reliabilities; one
    // forward pass over D_L fills them in for inspection
    auto pass = kernels::denoiser_pass(config.backend, model.attention.mlp, embeddings, weak,
                                       matched, pseudo, m, /*want_grads=*/false);
    model.reliability = global_reliability(pass.conditional);
  }

  model.pseudo_labels.reserve(n_l);
  for (size_t p = 0; p < n_l; ++p) model.pseudo_labels.emplace_back(matched[p], pseudo[p]);
  model.pseudo_provenance = config.renews_pseudo_labels() ? PseudoProvenance::kWeighted
                                                          : PseudoProvenance::kMajorityInit;
  return model;
}

Prediction predict(const TrainedModel& model, std::span<const float> embedding,
                   std::span<const int32_t> weak_row) {
  return predict_row(mode_heads(model), embedding, weak_row, model.class_count);
}

Metrics evaluate(const TrainedModel& model, std::span<const Document> docs, Split split,
                 const EmbeddingMatrix& embeddings, const WeakLabelMatrix& weak) {
  if (static_cast<int64_t>(docs.size()) != weak.n ||
      static_cast<uint32_t>(docs.size()) != embeddings.n) {
    throw std::runtime_error("corpus, embeddings and weak matrix sizes disagree");
  }
  std::vector<int64_t> rows;
  for (size_t i = 0; i < docs.size(); ++i) {
    if (docs[i].split != split) continue;
    if (!docs[i].gold_label) {
      throw std::runtime_error(std::string("missing gold labels on ") + split_name(split) +
                               " split (document '" + docs[i].id + "')");
    }
    rows.push_back(static_cast<int64_t>(i));
  }
  if (rows.empty()) {
    throw std::runtime_error(std::string("no documents in ") + split_name(split) + " split");
  }

  const Heads heads = mode_heads(model);
  const int m = model.class_count;

  Metrics metrics;
  metrics.evaluated = static_cast<int64_t>(rows.size());

  std::map<int, std::pair<int64_t, int64_t>> buckets;  // votes -> (count, correct)
  int64_t hits = 0;
  for (int64_t i : rows) {
    Prediction pr = predict_row(heads, embeddings.row(static_cast<size_t>(i)), weak.row(i), m);
    const bool ok = pr.label == *docs[static_cast<size_t>(i)].gold_label;
    hits += ok ? 1 : 0;
    auto& b = buckets[weak.votes_cast(i)];
    b.first += 1;
    b.second += ok ? 1 : 0;
  }
  metrics.accuracy = static_cast<double>(hits) / static_cast<double>(rows.size());
  for (const auto& [votes, counts] : buckets) {
    metrics.buckets.push_back(
        {votes, counts.first, static_cast<double>(counts.second) / static_cast<double>(counts.first)});
  }

  // pseudo-label noise on matched train samples, majority vote vs denoised
  const double nan = std::numeric_limits<double>::quiet_NaN();
  metrics.majority_noise = nan;
  metrics.denoised_noise = nan;
  int64_t graded = 0, majority_wrong = 0, denoised_wrong = 0;
  for (const auto& [row, label] : model.pseudo_labels) {
    const auto& doc = docs[static_cast<size_t>(row)];
    if (!doc.gold_label) continue;
    ++graded;
    if (majority_vote(weak.row(row), m) != *doc.gold_label) ++majority_wrong;
    if (label != *doc.gold_label) ++denoised_wrong;
  }
  if (graded > 0) {
    metrics.majority_noise = static_cast<double>(majority_wrong) / static_cast<double>(graded);
    metrics.denoised_noise = static_cast<double>(denoised_wrong) / static_cast<double>(graded);
  }
  return metrics;
}

static void write_config(std::ostream& os, const TrainConfig& c) {
  binio::write_f64(os, c.c1);
  binio::write_f64(os, c.c2);
  binio::write_f64(os, c.c3);
  binio::write_f64(os, c.alpha);
  binio::write_f64(os, c.lr);
  binio::write_u32(os, static_cast<uint32_t>(c.hidden));
  binio::write_u32(os, static_cast<uint32_t>(c.max_epochs));
  binio::write_u32(os, static_cast<uint32_t>(c.patience));
  binio::write_u32(os, static_cast<uint32_t>(c.threshold_p));
  binio::write_u64(os, c.seed);
  binio::write_u32(os, static_cast<uint32_t>(c.mode));
  binio::write_f64(os, c.clean_fraction);
  binio::write_u32(os, c.backend == ExecBackend::kParallel ? 1 : 0);
}

static TrainConfig read_config(std::istream& is) {
  TrainConfig c;
  c.c1 = binio::read_f64(is);
  c.c2 = binio::read_f64(is);
  c.c3 = binio::read_f64(is);
  c.alpha = binio::read_f64(is);
  c.lr = binio::read_f64(is);
  c.hidden = static_cast<int>(binio::read_u32(is));
  c.max_epochs = static_cast<int>(binio::read_u32(is));
  c.patience = static_cast<int>(binio::read_u32(is));
  c.threshold_p = static_cast<int>(binio::read_u32(is));
  c.seed = binio::read_u64(is);
  const uint32_t mode = binio::read_u32(is);
  if (mode > static_cast<uint32_t>(TrainMode::kRuleNeural)) {
    throw std::runtime_error("corrupt checkpoint: bad mode");
  }
  c.mode = static_cast<TrainMode>(mode);
  c.clean_fraction = binio::read_f64(is);
  c.backend = binio::read_u32(is) == 1 ? ExecBackend::kParallel : ExecBackend::kSerial;
  return c;
}

void save_model(const std::filesystem::path& path, const TrainedModel& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
  binio::write_magic(out, "WSM1");
  binio::write_u32(out, 2);  // kind: co-trained model
  write_config(out, model.config);
  binio::write_u32(out, static_cast<uint32_t>(model.class_count));
  binio::write_u32(out, static_cast<uint32_t>(model.best_epoch));
  nn::write_mlp(out, model.attention.mlp);
  nn::write_mlp(out, model.classifier.mlp);
  binio::write_u32(out, static_cast<uint32_t>(model.reliability.size()));
  for (const auto& name : model.source_names) binio::write_string(out, name);
  for (double a : model.reliability) binio::write_f64(out, a);
  binio::write_u32(out, model.pseudo_provenance == PseudoProvenance::kWeighted ? 1 : 0);
  binio::write_u64(out, model.pseudo_labels.size());
  for (const auto& [row, label] : model.pseudo_labels) {
    binio::write_u64(out, static_cast<uint64_t>(row));
    binio::write_u32(out, static_cast<uint32_t>(label));
  }
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
  binio::expect_magic(in, "WSM1", "checkpoint");
  if (binio::read_u32(in) != 2) throw std::runtime_error("checkpoint is not a co-trained model");
  TrainedModel model;
  model.config = read_config(in);
  model.class_count = static_cast<int>(binio::read_u32(in));
  model.best_epoch = static_cast<int>(binio::read_u32(in));
  model.attention.mlp = nn::read_mlp(in);
  model.classifier.mlp = nn::read_mlp(in);
  const uint32_t k = binio::read_u32(in);
  model.source_names.resize(k);
  for (auto& name : model.source_names) name = binio::read_string(in);
  model.reliability.resize(k);
  for (auto& a : model.reliability) a = binio::read_f64(in);
  model.pseudo_provenance = binio::read_u32(in) == 1 ? PseudoProvenance::kWeighted
                                                     : PseudoProvenance::kMajorityInit;
  const uint64_t count = binio::read_u64(in);
  model.pseudo_labels.resize(count);
  for (auto& [row, label] : model.pseudo_labels) {
    row = static_cast<int64_t>(binio::read_u64(in));
    label = static_cast<int>(binio::read_u32(in));
  }
  return model;
}

void write_train_log(const std::filesystem::path& path, std::span<const EpochRecord> log) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write train log '" + path.string() + "'");
  char buf[256];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof(buf), "%d\t%.10g\t%.10g\t%.10g\t%.10g\t%.10g\n", r.epoch, r.l1, r.l2,
                  r.l3, r.total, r.dev_acc);
    out << buf;
  }
}

}  // namespace covote
