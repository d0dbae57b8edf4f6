// covote: label a corpus with rule sources, co-train the denoiser and the
// neural classifier, and inspect the result.
//
// Subcommands: match, train, eval, inspect, gradcheck.
// Exit codes: 0 success, 1 input/config error, 2 numeric check failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "covote/cotrain.hpp"
#include "covote/gradcheck.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace covote;

namespace {

// Flat key/value config file; keys mirror the CLI flags (without the
// leading dashes). Flags given on the command line win.
std::map<std::string, std::string> load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path.string() + "'");
  std::map<std::string, std::string> cfg;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const char* ws = " \t\r";
    size_t a = s.find_first_not_of(ws);
    if (a == std::string::npos) return std::string();
    size_t b = s.find_last_not_of(ws);
    return s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": expected key = value");
    }
    cfg[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return cfg;
}

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// applies a config value to an option the user did not pass explicitly
struct ConfigApplier {
  const std::map<std::string, std::string>& cfg;

  bool pending(const CLI::Option* opt, const char* key, std::string& raw) const {
    if (opt != nullptr && opt->count() > 0) return false;
    auto it = cfg.find(key);
    if (it == cfg.end()) return false;
    raw = it->second;
    return true;
  }

  void str(const CLI::Option* opt, const char* key, std::string& target) const {
    std::string raw;
    if (pending(opt, key, raw)) target = raw;
  }
  void strs(const CLI::Option* opt, const char* key, std::vector<std::string>& target) const {
    std::string raw;
    if (pending(opt, key, raw)) target = split_list(raw, ',');
  }
  void real(const CLI::Option* opt, const char* key, double& target) const {
    std::string raw;
    if (pending(opt, key, raw)) target = std::stod(raw);
  }
  void integer(const CLI::Option* opt, const char* key, int& target) const {
    std::string raw;
    if (pending(opt, key, raw)) target = std::stoi(raw);
  }
  void u64(const CLI::Option* opt, const char* key, uint64_t& target) const {
    std::string raw;
    if (pending(opt, key, raw)) target = std::stoull(raw);
  }
};

struct DataOpts {
  std::string docs;
  std::string embeddings;
  std::string rules;
  std::vector<std::string> scores;
  std::vector<std::string> classes;
};

struct LoadedData {
  ClassCatalog catalog;
  std::vector<Document> documents;
  RuleSet rules;
  ScoreTables score_tables;
  WeakLabelMatrix matrix;
};

LoadedData load_inputs(const DataOpts& opts, bool need_rules) {
  LoadedData data{ClassCatalog::from_names(opts.classes), {}, {}, {}, {}};
  if (opts.docs.empty()) throw std::runtime_error("--docs is required");
  data.documents = load_documents(opts.docs, data.catalog);
  for (const auto& path : opts.scores) {
    ExternalScoreTable table = load_scores(path);
    validate_scores(table, data.documents);
    data.score_tables[table.name] = std::move(table);
  }
  if (need_rules) {
    if (opts.rules.empty()) throw std::runtime_error("--rules is required");
    data.rules = load_rules(opts.rules, data.catalog);
    if (data.rules.size() == 0) throw std::runtime_error("no rules defined");
    data.matrix = build_weak_label_matrix(data.rules, data.documents, data.score_tables);
  }
  return data;
}

std::string format_frac(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
}

int run_match(const DataOpts& data_opts, const std::string& out_dir, int threshold_p) {
  LoadedData data = load_inputs(data_opts, true);
  fs::create_directories(out_dir);
  save_weak_matrix(fs::path(out_dir) / "weak_labels.tsv", data.matrix, data.documents);

  std::vector<std::optional<int>> gold;
  gold.reserve(data.documents.size());
  for (const auto& d : data.documents) gold.push_back(d.gold_label);
  auto stats = rule_stats(data.matrix, gold);

  std::string table = "rule\tcoverage\taccuracy\n";
  for (size_t j = 0; j < stats.size(); ++j) {
    table += data.rules.rules[j].name + "\t" + format_frac(stats[j].coverage) + "\t" +
             (stats[j].accuracy ? format_frac(*stats[j].accuracy) : std::string("n/a")) + "\n";
  }
  write_text_file(fs::path(out_dir) / "rule_stats.tsv", table);
  std::cout << table;

  MatchPartition part = partition_matched(data.matrix, threshold_p);
  std::cout << "matched " << part.matched.size() << " / unmatched " << part.unmatched.size()
            << " (votes > " << threshold_p << ")\n";
  std::cout << "wrote " << (fs::path(out_dir) / "weak_labels.tsv").string() << "\n";
  return 0;
}

struct TrainOpts {
  TrainConfig config;
  std::string out_dir;
  std::string resplit;  // "0.8,0.1,0.1" to reassign splits before training
};

int run_train(const DataOpts& data_opts, const TrainOpts& opts) {
  LoadedData data = load_inputs(data_opts, true);
  if (data_opts.embeddings.empty()) throw std::runtime_error("--embeddings is required");

  if (!opts.resplit.empty()) {
    auto parts = split_list(opts.resplit, ',');
    if (parts.size() != 3) throw std::runtime_error("--resplit expects train,dev,test fractions");
    SplitRatios ratios{std::stod(parts[0]), std::stod(parts[1]), std::stod(parts[2])};
    split_corpus(data.documents, ratios, opts.config.seed);
  }

  EmbeddingMatrix embeddings = load_embeddings(data_opts.embeddings, data.documents);
  TrainedModel model =
      train(data.documents, embeddings, data.matrix, data.catalog.size(), opts.config);
  for (size_t j = 0; j < data.rules.size(); ++j) model.source_names[j] = data.rules.rules[j].name;

  fs::create_directories(opts.out_dir);
  save_model(fs::path(opts.out_dir) / "model.bin", model);
  write_train_log(fs::path(opts.out_dir) / "train_log.tsv", model.log);

  nlohmann::json summary;
  summary["epochs_run"] = model.log.size();
  summary["best_epoch"] = model.best_epoch;
  const auto& best = model.log[static_cast<size_t>(model.best_epoch - 1)];
  summary["dev_accuracy"] = std::isnan(best.dev_acc) ? nlohmann::json() : nlohmann::json(best.dev_acc);
  summary["mode"] = mode_name(opts.config.mode);

  std::optional<Metrics> test_metrics;
  try {
    test_metrics = evaluate(model, data.documents, Split::kTest, embeddings, data.matrix);
  } catch (const std::exception&) {
    // no test split or missing gold labels; summary reports null
  }
  if (test_metrics) {
    summary["test_accuracy"] = test_metrics->accuracy;
    if (!std::isnan(test_metrics->majority_noise)) {
      summary["majority_noise"] = test_metrics->majority_noise;
      summary["denoised_noise"] = test_metrics->denoised_noise;
    }
  } else {
    summary["test_accuracy"] = nullptr;
  }

  write_text_file(fs::path(opts.out_dir) / "train_summary.json", summary.dump(2) + "\n");
  std::cout << "trained " << model.log.size() << " epochs (best " << model.best_epoch << ")\n";
  if (!std::isnan(best.dev_acc)) std::cout << "dev accuracy " << format_frac(best.dev_acc) << "\n";
  if (test_metrics) {
    std::cout << "test accuracy " << format_frac(test_metrics->accuracy) << "\n";
    if (!std::isnan(test_metrics->majority_noise)) {
      std::cout << "pseudo-label noise on matched train: majority "
                << format_frac(test_metrics->majority_noise) << " -> denoised "
                << format_frac(test_metrics->denoised_noise) << "\n";
    }
  }
  std::cout << "wrote " << (fs::path(opts.out_dir) / "model.bin").string() << "\n";
  return 0;
}

int run_eval(const DataOpts& data_opts, const std::string& model_path, const std::string& split,
             const std::string& out_dir) {
  TrainedModel model = load_model(model_path);
  LoadedData data = load_inputs(data_opts, true);
  if (data_opts.embeddings.empty()) throw std::runtime_error("--embeddings is required");
  EmbeddingMatrix embeddings = load_embeddings(data_opts.embeddings, data.documents);

  if (model.class_count != data.catalog.size()) {
    throw std::runtime_error("checkpoint class count does not match --classes");
  }
  if (model.attention.mlp.in_dim() != static_cast<int>(embeddings.d)) {
    throw std::runtime_error("checkpoint embedding dimension does not match --embeddings");
  }
  if (static_cast<int>(model.reliability.size()) != data.matrix.k) {
    throw std::runtime_error("checkpoint source count does not match --rules");
  }

  Split target;
  if (split == "train") {
    target = Split::kTrain;
  } else if (split == "dev") {
    target = Split::kDev;
  } else if (split == "test") {
    target = Split::kTest;
  } else {
    throw std::runtime_error("--split must be train, dev or test");
  }

  Metrics metrics = evaluate(model, data.documents, target, embeddings, data.matrix);

  nlohmann::json report;
  report["split"] = split;
  report["evaluated"] = metrics.evaluated;
  report["accuracy"] = metrics.accuracy;
  report["majority_noise"] =
      std::isnan(metrics.majority_noise) ? nlohmann::json() : nlohmann::json(metrics.majority_noise);
  report["denoised_noise"] =
      std::isnan(metrics.denoised_noise) ? nlohmann::json() : nlohmann::json(metrics.denoised_noise);
  report["buckets"] = nlohmann::json::array();
  for (const auto& b : metrics.buckets) {
    report["buckets"].push_back({{"rules", b.votes}, {"count", b.count}, {"accuracy", b.accuracy}});
  }

  fs::create_directories(out_dir);
  write_text_file(fs::path(out_dir) / "eval_report.json", report.dump(2) + "\n");

  std::cout << split << " accuracy " << format_frac(metrics.accuracy) << " over "
            << metrics.evaluated << " documents\n";
  if (!std::isnan(metrics.majority_noise)) {
    std::cout << "pseudo-label noise on matched train: majority "
              << format_frac(metrics.majority_noise) << " -> denoised "
              << format_frac(metrics.denoised_noise) << "\n";
  }
  for (const auto& b : metrics.buckets) {
    std::cout << "  " << b.votes << " rule(s): " << b.count << " docs, accuracy "
              << format_frac(b.accuracy) << "\n";
  }
  std::cout << "wrote " << (fs::path(out_dir) / "eval_report.json").string() << "\n";
  return 0;
}

int run_inspect(const std::string& model_path) {
  TrainedModel model = load_model(model_path);
  std::vector<size_t> order(model.reliability.size());
  for (size_t j = 0; j < order.size(); ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return model.reliability[a] > model.reliability[b];
  });
  char buf[64];
  for (size_t j : order) {
    std::snprintf(buf, sizeof(buf), "%.6f", model.reliability[j]);
    std::cout << model.source_names[j] << "\t" << buf << "\n";
  }
  return 0;
}

int run_gradcheck(uint64_t seed, int trials, const std::string& corrupt) {
  GradCheckReport report = run_gradcheck_suite(seed, trials, corrupt);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3e", report.worst_rel_err);
  std::cout << "gradient check: " << report.trials << " trials, worst relative error " << buf
            << " (tolerance " << report.tolerance << ")\n";
  if (!report.pass) {
    std::cout << "FAIL: worst offender " << report.worst_case << "\n";
    return 2;
  }
  std::cout << "PASS\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weakly supervised text classification via source-reliability co-training"};
  app.require_subcommand(1);

  std::string config_path;
  DataOpts data;
  TrainOpts train_opts;
  std::string out_dir = "out";
  std::string model_path;
  std::string split = "test";
  std::string mode_str = "full";
  std::string backend_str = "parallel";
  uint64_t seed = 1;
  int threshold_p = 1;
  int trials = 100;
  std::string corrupt;

  auto add_data_opts = [&](CLI::App* cmd, bool with_embeddings) {
    cmd->add_option("--config", config_path, "flat key=value config file; flags win");
    cmd->add_option("--docs", data.docs, "documents file (one JSON object per line)");
    if (with_embeddings) {
      cmd->add_option("--embeddings", data.embeddings, "binary embeddings file (WSE1)");
    }
    cmd->add_option("--rules", data.rules, "labeling rules file");
    cmd->add_option("--scores", data.scores, "external score files (doc_id<TAB>value)");
    cmd->add_option("--classes", data.classes, "ordered class names");
  };

  CLI::App* match = app.add_subcommand("match", "build the weak label matrix and rule stats");
  add_data_opts(match, false);
  match->add_option("--out", out_dir, "output directory");
  match->add_option("--threshold-p", threshold_p, "matched means more than p votes");

  CLI::App* train_cmd = app.add_subcommand("train", "co-train the denoiser and the classifier");
  add_data_opts(train_cmd, true);
  train_cmd->add_option("--out", out_dir, "output directory");
  train_cmd->add_option("--threshold-p", threshold_p, "matched means more than p votes");
  train_cmd->add_option("--seed", seed, "master seed");
  train_cmd->add_option("--mode", mode_str, "full|rule-only|neural-only|neural-self|rule-neural");
  train_cmd->add_option("--c1", train_opts.config.c1, "denoiser loss weight");
  train_cmd->add_option("--c2", train_opts.config.c2, "classifier loss weight");
  train_cmd->add_option("--c3", train_opts.config.c3, "self-training loss weight");
  train_cmd->add_option("--alpha", train_opts.config.alpha, "ensembling momentum");
  train_cmd->add_option("--lr", train_opts.config.lr, "learning rate");
  train_cmd->add_option("--hidden", train_opts.config.hidden, "hidden width");
  train_cmd->add_option("--max-epochs", train_opts.config.max_epochs, "epoch cap");
  train_cmd->add_option("--clean-fraction", train_opts.config.clean_fraction,
                        "fraction of matched train gold labels pinned as clean");
  train_cmd->add_option("--backend", backend_str, "serial|parallel");
  train_cmd->add_option("--resplit", train_opts.resplit,
                        "reassign splits with these train,dev,test fractions");

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  add_data_opts(eval_cmd, true);
  eval_cmd->add_option("--model", model_path, "checkpoint file");
  eval_cmd->add_option("--split", split, "train|dev|test");
  eval_cmd->add_option("--out", out_dir, "output directory");

  CLI::App* inspect = app.add_subcommand("inspect", "print source reliabilities, descending");
  inspect->add_option("--config", config_path, "flat key=value config file; flags win");
  inspect->add_option("--model", model_path, "checkpoint file");

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient self-check");
  gradcheck->add_option("--seed", seed, "suite seed");
  gradcheck->add_option("--trials", trials, "number of random micro-instances");
  gradcheck->add_option("--corrupt", corrupt, "test hook: corrupt this tensor's gradient")
      ->group("");  // hidden

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    if (!config_path.empty()) {
      auto cfg = load_config_file(config_path);
      ConfigApplier apply{cfg};
      apply.str(cmd->get_option_no_throw("--docs"), "docs", data.docs);
      apply.str(cmd->get_option_no_throw("--embeddings"), "embeddings", data.embeddings);
      apply.str(cmd->get_option_no_throw("--rules"), "rules", data.rules);
      apply.strs(cmd->get_option_no_throw("--scores"), "scores", data.scores);
      apply.strs(cmd->get_option_no_throw("--classes"), "classes", data.classes);
      apply.str(cmd->get_option_no_throw("--out"), "out", out_dir);
      apply.str(cmd->get_option_no_throw("--model"), "model", model_path);
      apply.str(cmd->get_option_no_throw("--split"), "split", split);
      apply.str(cmd->get_option_no_throw("--mode"), "mode", mode_str);
      apply.str(cmd->get_option_no_throw("--backend"), "backend", backend_str);
      apply.str(cmd->get_option_no_throw("--resplit"), "resplit", train_opts.resplit);
      apply.u64(cmd->get_option_no_throw("--seed"), "seed", seed);
      apply.integer(cmd->get_option_no_throw("--threshold-p"), "threshold-p", threshold_p);
      apply.integer(cmd->get_option_no_throw("--hidden"), "hidden", train_opts.config.hidden);
      apply.integer(cmd->get_option_no_throw("--max-epochs"), "max-epochs",
                    train_opts.config.max_epochs);
      apply.real(cmd->get_option_no_throw("--c1"), "c1", train_opts.config.c1);
      apply.real(cmd->get_option_no_throw("--c2"), "c2", train_opts.config.c2);
      apply.real(cmd->get_option_no_throw("--c3"), "c3", train_opts.config.c3);
      apply.real(cmd->get_option_no_throw("--alpha"), "alpha", train_opts.config.alpha);
      apply.real(cmd->get_option_no_throw("--lr"), "lr", train_opts.config.lr);
      apply.real(cmd->get_option_no_throw("--clean-fraction"), "clean-fraction",
                 train_opts.config.clean_fraction);
    }

    if (cmd == match) return run_match(data, out_dir, threshold_p);
    if (cmd == train_cmd) {
      auto mode = parse_mode(mode_str);
      if (!mode) throw std::runtime_error("unknown mode '" + mode_str + "'");
      train_opts.config.mode = *mode;
      if (backend_str == "serial") {
        train_opts.config.backend = ExecBackend::kSerial;
      } else if (backend_str == "parallel") {
        train_opts.config.backend = ExecBackend::kParallel;
      } else {
        throw std::runtime_error("--backend must be serial or parallel");
      }
      train_opts.config.seed = seed;
      train_opts.config.threshold_p = threshold_p;
      train_opts.out_dir = out_dir;
      return run_train(data, train_opts);
    }
    if (cmd == eval_cmd) {
      if (model_path.empty()) throw std::runtime_error("--model is required");
      return run_eval(data, model_path, split, out_dir);
    }
    if (cmd == inspect) {
      if (model_path.empty()) throw std::runtime_error("--model is required");
      return run_inspect(model_path);
    }
    if (cmd == gradcheck) return run_gradcheck(seed, trials, corrupt);
    throw std::runtime_error("no command given");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
