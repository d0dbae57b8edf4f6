#pragma once

// Labeling-rule DSL: parsing, evaluation against documents, and the weak
// label matrix with its matched/unmatched partition.
//
// Grammar (one rule per line, '#' starts a comment):
//   rule <name> ":" <body> "=>" <CLASS>
//   body := HAS "(" "[" string ("," string)* "]" ")"
//         | MATCH "(" string ")"
//         | LENGTH "(" cmp integer ")"
//         | EXTERNAL "(" string "," cmp real ")"
//   cmp  := "<" | "<=" | ">" | ">="

#include <cstdint>
#include <filesystem>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <vector>

#include "covote/corpus.hpp"

namespace covote {

enum class SourceKind { kKeyword, kRegex, kLength, kExternal };
enum class Cmp { kLt, kLe, kGt, kGe };

const char* cmp_token(Cmp c);
bool cmp_apply(Cmp c, double lhs, double rhs);

struct Rule {
  std::string name;
  SourceKind kind = SourceKind::kKeyword;
  int target = 0;  // class index

  std::vector<std::string> keywords;  // kKeyword
  std::string pattern;                // kRegex
  std::regex compiled;                // kRegex, icase
  Cmp cmp = Cmp::kLt;                 // kLength / kExternal
  long bound = 0;                     // kLength
  std::string score_name;             // kExternal
  double threshold = 0;               // kExternal
};

struct RuleSet {
  std::vector<Rule> rules;
  size_t size() const { return rules.size(); }
};

struct ParseError : std::runtime_error {
  ParseError(int line, int col, const std::string& msg)
      : std::runtime_error(std::to_string(line) + ":" + std::to_string(col) + ": " + msg),
        line(line),
        col(col) {}
  int line;
  int col;
};

RuleSet parse_rules(std::string_view text, const ClassCatalog& catalog);
RuleSet load_rules(const std::filesystem::path& path, const ClassCatalog& catalog);

// canonical text form; parse(print(rs)) reproduces rs
std::string print_rules(const RuleSet& rs, const ClassCatalog& catalog);

// Tokenizations used by rule semantics. Keyword matching works on
// lowercased alphanumeric runs (bytes >= 0x80 count as word bytes so
// UTF-8 text stays intact); LENGTH counts whitespace-delimited tokens.
std::vector<std::string> keyword_tokens(std::string_view text);
size_t whitespace_token_count(std::string_view text);

// Returns rule.target on match, -1 (abstain) otherwise. External rules
// abstain on documents missing from their score table; a missing table
// is an error.
int evaluate_rule(const Rule& rule, const Document& doc, const ScoreTables& scores);

struct WeakLabelMatrix {
  int64_t n = 0;
  int k = 0;
  std::vector<int32_t> votes;  // row-major, -1 = abstain

  int32_t vote(int64_t i, int j) const { return votes[static_cast<size_t>(i) * k + j]; }
  std::span<const int32_t> row(int64_t i) const {
    return {votes.data() + static_cast<size_t>(i) * k, static_cast<size_t>(k)};
  }
  int votes_cast(int64_t i) const;
};

enum class ExecBackend { kSerial, kParallel };

WeakLabelMatrix build_weak_label_matrix(const RuleSet& rules, std::span<const Document> docs,
                                        const ScoreTables& scores,
                                        ExecBackend backend = ExecBackend::kParallel);

struct MatchPartition {
  std::vector<int64_t> matched;    // D_L: rows with more than p votes
  std::vector<int64_t> unmatched;  // D_U
  int threshold_p = 0;
};

MatchPartition partition_matched(const WeakLabelMatrix& m, int p);

struct RuleStats {
  double coverage = 0;
  std::optional<double> accuracy;  // none when the rule matches nothing
};

// gold is indexed by row; rows without gold are skipped in the accuracy
// numerator and denominator.
std::vector<RuleStats> rule_stats(const WeakLabelMatrix& m,
                                  std::span<const std::optional<int>> gold);

// Export format: UTF-8 lines "doc_id<TAB>v_1<TAB>...<TAB>v_k".
void save_weak_matrix(const std::filesystem::path& path, const WeakLabelMatrix& m,
                      std::span<const Document> docs);
WeakLabelMatrix load_weak_matrix(const std::filesystem::path& path,
                                 std::span<const Document> docs);

}  // namespace covote
