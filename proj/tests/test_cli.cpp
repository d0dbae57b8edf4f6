#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <sys/wait.h>

#include "covote/corpus.hpp"
#include "covote/cotrain.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace covote;
using testutil::TempDir;

namespace {

using testutil::run_cli;

std::string toy_args() {
  const auto data = testutil::data_dir();
  return "--docs " + (data / "toy_docs.jsonl").string() + " --rules " +
         (data / "toy_rules.txt").string() + " --classes SPAM --classes HAM";
}

// deterministic class-separated embeddings for the toy corpus
void write_toy_embeddings(const std::filesystem::path& path) {
  auto catalog = ClassCatalog::from_names({"SPAM", "HAM"});
  auto docs = load_documents(testutil::data_dir() / "toy_docs.jsonl", catalog);
  EmbeddingMatrix emb;
  emb.n = static_cast<uint32_t>(docs.size());
  emb.d = 4;
  emb.values.resize(emb.n * emb.d);
  for (size_t i = 0; i < docs.size(); ++i) {
    const double mean = *docs[i].gold_label == 0 ? 1.0 : -1.0;
    for (uint32_t c = 0; c < emb.d; ++c) {
      emb.values[i * emb.d + c] =
          static_cast<float>(mean + 0.05 * static_cast<double>(i) + 0.01 * c);
    }
  }
  save_embeddings(path, emb, corpus_id_hash(docs));
}

}  // namespace

TEST_CASE("match writes the golden matrix and hand-computed rule stats") {
  TempDir tmp("match");
  auto result = run_cli("match " + toy_args() + " --out " + tmp.path.string() + " --threshold-p 0");
  CAPTURE(result.output);
  REQUIRE(result.exit_code == 0);

  CHECK(testutil::read_file(tmp.file("weak_labels.tsv")) ==
        testutil::read_file(testutil::data_dir() / "toy_matrix_golden.tsv"));
  const auto stats = testutil::read_file(tmp.file("rule_stats.tsv"));
  CHECK(stats == "rule\tcoverage\taccuracy\n"
                 "r_subscribe\t0.3750\t1.0000\n"
                 "r_checkout\t0.3750\t0.6667\n"
                 "r_short\t0.3750\t0.6667\n");
  CHECK(result.output.find("matched 7 / unmatched 1 (votes > 0)") != std::string::npos);
}

TEST_CASE("match respects --threshold-p and is idempotent") {
  TempDir tmp("matchp");
  auto first = run_cli("match " + toy_args() + " --out " + tmp.path.string() + " --threshold-p 1");
  REQUIRE(first.exit_code == 0);
  CHECK(first.output.find("matched 2 / unmatched 6 (votes > 1)") != std::string::npos);

  const auto matrix_bytes = testutil::read_file(tmp.file("weak_labels.tsv"));
  const auto stats_bytes = testutil::read_file(tmp.file("rule_stats.tsv"));
  auto second = run_cli("match " + toy_args() + " --out " + tmp.path.string() + " --threshold-p 1");
  CHECK(second.exit_code == 0);
  CHECK(second.output == first.output);
  CHECK(testutil::read_file(tmp.file("weak_labels.tsv")) == matrix_bytes);
  CHECK(testutil::read_file(tmp.file("rule_stats.tsv")) == stats_bytes);
}

TEST_CASE("match rejects an empty ruleset with exit 1") {
  TempDir tmp("emptyrules");
  testutil::write_file(tmp.file("rules.txt"), "# no rules here\n");
  auto result = run_cli("match --docs " + (testutil::data_dir() / "toy_docs.jsonl").string() +
                        " --rules " + tmp.file("rules.txt").string() +
                        " --classes SPAM --classes HAM --out " + tmp.path.string());
  CHECK(result.exit_code == 1);
  CHECK(result.output.find("no rules defined") != std::string::npos);
}

TEST_CASE("match reports parse errors with location and exit 1") {
  TempDir tmp("badrules");
  testutil::write_file(tmp.file("rules.txt"), "rule ok: LENGTH(< 2) => HAM\nrule bad: HAS([]) => SPAM\n");
  auto result = run_cli("match --docs " + (testutil::data_dir() / "toy_docs.jsonl").string() +
                        " --rules " + tmp.file("rules.txt").string() +
                        " --classes SPAM --classes HAM --out " + tmp.path.string());
  CHECK(result.exit_code == 1);
  CHECK(result.output.find("2:") != std::string::npos);
  CHECK(result.output.find("empty keyword list") != std::string::npos);
}

TEST_CASE("train then eval on the toy corpus") {
  TempDir tmp("trainflow");
  write_toy_embeddings(tmp.file("emb.bin"));
  // the checked-in fixture is the same file this helper produces
  CHECK(testutil::read_file(tmp.file("emb.bin")) ==
        testutil::read_file(testutil::data_dir() / "toy_embeddings.bin"));
  const std::string common = toy_args() + " --embeddings " + tmp.file("emb.bin").string();

  auto trained = run_cli("train " + common + " --out " + tmp.path.string() +
                         " --hidden 4 --max-epochs 6 --seed 3");
  CAPTURE(trained.output);
  REQUIRE(trained.exit_code == 0);
  CHECK(std::filesystem::exists(tmp.file("model.bin")));
  CHECK(std::filesystem::exists(tmp.file("train_log.tsv")));
  CHECK(std::filesystem::exists(tmp.file("train_summary.json")));

  // the train log has the documented six-column shape, one line per epoch
  const auto log = testutil::read_file(tmp.file("train_log.tsv"));
  size_t lines = 0, tabs_first_line = 0;
  for (size_t i = 0; i < log.size(); ++i) {
    if (log[i] == '\n') ++lines;
    if (lines == 0 && log[i] == '\t') ++tabs_first_line;
  }
  CHECK(lines == 6);
  CHECK(tabs_first_line == 5);

  auto summary = nlohmann::json::parse(testutil::read_file(tmp.file("train_summary.json")));
  CHECK(summary["epochs_run"] == 6);
  CHECK(summary["mode"] == "full");

  SUBCASE("eval writes a parsable report consistent with its stdout") {
    auto eval = run_cli("eval " + common + " --model " + tmp.file("model.bin").string() +
                        " --split test --out " + tmp.path.string());
    CAPTURE(eval.output);
    REQUIRE(eval.exit_code == 0);
    auto report = nlohmann::json::parse(testutil::read_file(tmp.file("eval_report.json")));
    CHECK(report["split"] == "test");
    CHECK(report["evaluated"] == 1);
    const double acc = report["accuracy"].get<double>();
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
    char printed[32];
    std::snprintf(printed, sizeof(printed), "%.4f", acc);
    CHECK(eval.output.find(std::string("test accuracy ") + printed) != std::string::npos);

    auto again = run_cli("eval " + common + " --model " + tmp.file("model.bin").string() +
                         " --split test --out " + tmp.path.string());
    CHECK(again.output == eval.output);
  }

  SUBCASE("eval fails with exit 1 when the split has no gold labels") {
    // same corpus with the test-split label removed
    std::string docs_text = testutil::read_file(testutil::data_dir() / "toy_docs.jsonl");
    auto pos = docs_text.find("{\"id\":\"y8\"");
    REQUIRE(pos != std::string::npos);
    std::string patched = docs_text.substr(0, pos) +
                          "{\"id\":\"y8\",\"text\":\"you should check it out sometime ok\","
                          "\"split\":\"test\"}\n";
    testutil::write_file(tmp.file("docs_nogold.jsonl"), patched);
    auto eval = run_cli("eval --docs " + tmp.file("docs_nogold.jsonl").string() + " --rules " +
                        (testutil::data_dir() / "toy_rules.txt").string() +
                        " --classes SPAM --classes HAM --embeddings " + tmp.file("emb.bin").string() +
                        " --model " + tmp.file("model.bin").string() + " --split test --out " +
                        tmp.path.string());
    CHECK(eval.exit_code == 1);
    CHECK(eval.output.find("missing gold labels") != std::string::npos);
  }

  SUBCASE("ablation mode and clean-fraction flags reach the trainer") {
    auto ablation = run_cli("train " + common + " --out " + (tmp.path / "ablation").string() +
                            " --hidden 4 --max-epochs 4 --seed 3 --threshold-p 0" +
                            " --mode rule-only --clean-fraction 0.05");
    CAPTURE(ablation.output);
    CHECK(ablation.exit_code == 0);
    auto summary = nlohmann::json::parse(
        testutil::read_file(tmp.path / "ablation" / "train_summary.json"));
    CHECK(summary["mode"] == "rule-only");
    auto model = load_model(tmp.path / "ablation" / "model.bin");
    CHECK(model.config.mode == TrainMode::kRuleOnly);
    CHECK(model.config.clean_fraction == 0.05);
  }

  SUBCASE("--resplit reassigns splits before training") {
    auto resplit = run_cli("train " + common + " --out " + (tmp.path / "resplit").string() +
                           " --hidden 4 --max-epochs 4 --seed 9 --threshold-p 0" +
                           " --resplit 0.75,0.125,0.125");
    CAPTURE(resplit.output);
    CHECK(resplit.exit_code == 0);
    // 8 docs at (0.75, 0.125, 0.125) puts exactly one document in each of
    // dev and test, so evaluation still finds a test split
    auto summary = nlohmann::json::parse(
        testutil::read_file(tmp.path / "resplit" / "train_summary.json"));
    CHECK_FALSE(summary["test_accuracy"].is_null());
  }

  SUBCASE("eval rejects dimension mismatches") {
    auto catalog = ClassCatalog::from_names({"SPAM", "HAM"});
    auto docs = load_documents(testutil::data_dir() / "toy_docs.jsonl", catalog);
    EmbeddingMatrix wide;
    wide.n = static_cast<uint32_t>(docs.size());
    wide.d = 5;
    wide.values.assign(wide.n * wide.d, 0.25f);
    save_embeddings(tmp.file("wide.bin"), wide, corpus_id_hash(docs));
    auto eval = run_cli("eval " + toy_args() + " --embeddings " + tmp.file("wide.bin").string() +
                        " --model " + tmp.file("model.bin").string() + " --out " +
                        tmp.path.string());
    CHECK(eval.exit_code == 1);
    CHECK(eval.output.find("does not match") != std::string::npos);
  }
}

TEST_CASE("inspect prints reliabilities in descending order") {
  TempDir tmp("inspect");
  TrainedModel model;
  model.class_count = 2;
  model.attention.mlp = nn::init_params(4, 3, 1, 1);
  model.classifier.mlp = nn::init_params(4, 3, 2, 2);
  model.reliability = {0.1074, 0.1074, 0.2482};
  model.source_names = {"keyword_mood", "keyword_service", "keyword_general"};
  model.pseudo_labels = {{0, 0}};
  save_model(tmp.file("model.bin"), model);

  auto result = run_cli("inspect --model " + tmp.file("model.bin").string());
  REQUIRE(result.exit_code == 0);
  CHECK(result.output == "keyword_general\t0.248200\n"
                         "keyword_mood\t0.107400\n"
                         "keyword_service\t0.107400\n");

  // stable across invocations
  CHECK(run_cli("inspect --model " + tmp.file("model.bin").string()).output == result.output);

  SUBCASE("single-source model prints exactly one line") {
    model.reliability = {0.42};
    model.source_names = {"only_rule"};
    save_model(tmp.file("one.bin"), model);
    auto one = run_cli("inspect --model " + tmp.file("one.bin").string());
    CHECK(one.output == "only_rule\t0.420000\n");
  }
  SUBCASE("corrupt checkpoint fails cleanly") {
    testutil::write_file(tmp.file("broken.bin"), "not a checkpoint");
    auto broken = run_cli("inspect --model " + tmp.file("broken.bin").string());
    CHECK(broken.exit_code == 1);
  }
}

TEST_CASE("gradcheck passes, fails on corruption with exit 2, and is repeatable") {
  auto ok = run_cli("gradcheck --seed 11 --trials 3");
  CAPTURE(ok.output);
  CHECK(ok.exit_code == 0);
  CHECK(ok.output.find("PASS") != std::string::npos);

  auto repeat = run_cli("gradcheck --seed 11 --trials 3");
  CHECK(repeat.output == ok.output);

  auto corrupted = run_cli("gradcheck --seed 11 --trials 2 --corrupt attention.w1");
  CHECK(corrupted.exit_code == 2);
  CHECK(corrupted.output.find("FAIL") != std::string::npos);
  CHECK(corrupted.output.find("attention.w1") != std::string::npos);
}

TEST_CASE("config file supplies defaults and flags win") {
  TempDir tmp("config");
  const auto data = testutil::data_dir();
  testutil::write_file(tmp.file("run.cfg"), "# toy run\n"
                                            "docs = " + (data / "toy_docs.jsonl").string() + "\n" +
                                            "rules = " + (data / "toy_rules.txt").string() + "\n" +
                                            "classes = SPAM,HAM\n"
                                            "out = " + tmp.path.string() + "\n" +
                                            "threshold-p = 1\n");
  auto from_config = run_cli("match --config " + tmp.file("run.cfg").string());
  CAPTURE(from_config.output);
  REQUIRE(from_config.exit_code == 0);
  CHECK(from_config.output.find("matched 2 / unmatched 6 (votes > 1)") != std::string::npos);

  auto overridden = run_cli("match --config " + tmp.file("run.cfg").string() + " --threshold-p 0");
  CHECK(overridden.output.find("matched 7 / unmatched 1 (votes > 0)") != std::string::npos);

  auto missing = run_cli("match --config " + tmp.file("nope.cfg").string());
  CHECK(missing.exit_code == 1);
}
