#include "covote/rules.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace covote {

const char* cmp_token(Cmp c) {
  switch (c) {
    case Cmp::kLt: return "<";
    case Cmp::kLe: return "<=";
    case Cmp::kGt: return ">";
    case Cmp::kGe: return ">=";
  }
  return "?";
}

bool cmp_apply(Cmp c, double lhs, double rhs) {
  switch (c) {
    case Cmp::kLt: return lhs < rhs;
    case Cmp::kLe: return lhs <= rhs;
    case Cmp::kGt: return lhs > rhs;
    case Cmp::kGe: return lhs >= rhs;
  }
  return false;
}

namespace {

// single-line lexer; '#' outside a string ends the line
struct Lexer {
  std::string_view line;
  int lineno;
  size_t pos = 0;

  [[noreturn]] void fail(const std::string& msg, size_t at) const {
    throw ParseError(lineno, static_cast<int>(at) + 1, msg);
  }

  void skip_ws() {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r')) ++pos;
    if (pos < line.size() && line[pos] == '#') pos = line.size();
  }

  bool at_end() {
    skip_ws();
    return pos >= line.size();
  }

  char peek() {
    skip_ws();
    return pos < line.size() ? line[pos] : '\0';
  }

  void expect(char c) {
    skip_ws();
    if (pos >= line.size() || line[pos] != c) {
      fail(std::string("expected '") + c + "'", pos);
    }
    ++pos;
  }

  bool try_consume(char c) {
    skip_ws();
    if (pos < line.size() && line[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }

  std::string ident() {
    skip_ws();
    size_t start = pos;
    while (pos < line.size() && (std::isalnum(static_cast<unsigned char>(line[pos])) || line[pos] == '_')) {
      ++pos;
    }
    if (pos == start) fail("expected identifier", start);
    return std::string(line.substr(start, pos - start));
  }

  std::string quoted_string() {
    skip_ws();
    if (pos >= line.size() || line[pos] != '"') fail("expected string literal", pos);
    ++pos;
    std::string out;
    while (pos < line.size() && line[pos] != '"') {
      if (line[pos] == '\\' && pos + 1 < line.size()) {
        ++pos;
        out.push_back(line[pos]);
      } else {
        out.push_back(line[pos]);
      }
      ++pos;
    }
    if (pos >= line.size()) fail("unterminated string literal", pos);
    ++pos;
    return out;
  }

  Cmp comparator() {
    skip_ws();
    size_t start = pos;
    if (pos < line.size() && line[pos] == '<') {
      ++pos;
      if (pos < line.size() && line[pos] == '=') {
        ++pos;
        return Cmp::kLe;
      }
      return Cmp::kLt;
    }
    if (pos < line.size() && line[pos] == '>') {
      ++pos;
      if (pos < line.size() && line[pos] == '=') {
        ++pos;
        return Cmp::kGe;
      }
      return Cmp::kGt;
    }
    fail("unknown comparator", start);
  }

  long integer() {
    skip_ws();
    size_t start = pos;
    while (pos < line.size() && std::isdigit(static_cast<unsigned char>(line[pos]))) ++pos;
    if (pos == start) fail("expected integer", start);
    return std::stol(std::string(line.substr(start, pos - start)));
  }

  double real() {
    skip_ws();
    size_t start = pos;
    while (pos < line.size() &&
           (std::isdigit(static_cast<unsigned char>(line[pos])) || line[pos] == '.' ||
            line[pos] == '-' || line[pos] == '+' || line[pos] == 'e' || line[pos] == 'E')) {
      ++pos;
    }
    if (pos == start) fail("expected number", start);
    try {
      return std::stod(std::string(line.substr(start, pos - start)));
    } catch (const std::exception&) {
      fail("bad number", start);
    }
  }

  void expect_arrow() {
    skip_ws();
    if (pos + 2 > line.size() || line.compare(pos, 2, "=>") != 0) fail("expected '=>'", pos);
    pos += 2;
  }
};

Rule parse_rule_line(Lexer& lx, const ClassCatalog& catalog) {
  Rule rule;
  std::string kw = lx.ident();
  if (kw != "rule") lx.fail("expected 'rule'", lx.pos);
  rule.name = lx.ident();
  lx.expect(':');

  size_t kind_at = lx.pos;
  std::string kind = lx.ident();
  if (kind == "HAS") {
    rule.kind = SourceKind::kKeyword;
    lx.expect('(');
    lx.expect('[');
    if (lx.try_consume(']')) lx.fail("empty keyword list", kind_at);
    do {
      rule.keywords.push_back(lx.quoted_string());
    } while (lx.try_consume(','));
    lx.expect(']');
    lx.expect(')');
  } else if (kind == "MATCH") {
    rule.kind = SourceKind::kRegex;
    lx.expect('(');
    rule.pattern = lx.quoted_string();
    lx.expect(')');
    try {
      rule.compiled = std::regex(rule.pattern, std::regex::ECMAScript | std::regex::icase);
    } catch (const std::regex_error&) {
      lx.fail("invalid regex", kind_at);
    }
  } else if (kind == "LENGTH") {
    rule.kind = SourceKind::kLength;
    lx.expect('(');
    rule.cmp = lx.comparator();
    rule.bound = lx.integer();
    lx.expect(')');
  } else if (kind == "EXTERNAL") {
    rule.kind = SourceKind::kExternal;
    lx.expect('(');
    rule.score_name = lx.quoted_string();
    lx.expect(',');
    rule.cmp = lx.comparator();
    rule.threshold = lx.real();
    lx.expect(')');
  } else {
    lx.fail("unknown rule body '" + kind + "'", kind_at);
  }

  lx.expect_arrow();
  size_t class_at = lx.pos;
  std::string cls = lx.ident();
  int idx = catalog.index_of(cls);
  if (idx < 0) lx.fail("unknown class '" + cls + "'", class_at);
  rule.target = idx;
  if (!lx.at_end()) lx.fail("unexpected trailing input", lx.pos);
  return rule;
}

}  // namespace

RuleSet parse_rules(std::string_view text, const ClassCatalog& catalog) {
  RuleSet rs;
  std::set<std::string> names;
  int lineno = 0;
  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find('\n', start);
    std::string_view line =
        text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    ++lineno;
    Lexer lx{line, lineno};
    if (!lx.at_end()) {
      Rule rule = parse_rule_line(lx, catalog);
      if (!names.insert(rule.name).second) {
        throw ParseError(lineno, 1, "duplicate rule name '" + rule.name + "'");
      }
      rs.rules.push_back(std::move(rule));
    }
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return rs;
}

RuleSet load_rules(const std::filesystem::path& path, const ClassCatalog& catalog) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open rules file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_rules(ss.str(), catalog);
}

static std::string escape_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string print_rules(const RuleSet& rs, const ClassCatalog& catalog) {
  std::string out;
  char buf[64];
  for (const Rule& r : rs.rules) {
    out += "rule " + r.name + ": ";
    switch (r.kind) {
      case SourceKind::kKeyword: {
        out += "HAS([";
        for (size_t i = 0; i < r.keywords.size(); ++i) {
          if (i) out += ", ";
          out += escape_string(r.keywords[i]);
        }
        out += "])";
        break;
      }
      case SourceKind::kRegex:
        out += "MATCH(" + escape_string(r.pattern) + ")";
        break;
      case SourceKind::kLength:
        out += "LENGTH(" + std::string(cmp_token(r.cmp)) + " " + std::to_string(r.bound) + ")";
        break;
      case SourceKind::kExternal:
        std::snprintf(buf, sizeof(buf), "%.17g", r.threshold);
        out += "EXTERNAL(" + escape_string(r.score_name) + ", " + cmp_token(r.cmp) + " " + buf + ")";
        break;
    }
    out += " => " + catalog.names[static_cast<size_t>(r.target)] + "\n";
  }
  return out;
}

std::vector<std::string> keyword_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    bool word = std::isalnum(c) || c >= 0x80;
    if (word) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

size_t whitespace_token_count(std::string_view text) {
  size_t count = 0;
  bool in_token = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++count;
    }
  }
  return count;
}

static bool contains_token_seq(const std::vector<std::string>& tokens,
                               const std::vector<std::string>& phrase) {
  if (phrase.empty() || phrase.size() > tokens.size()) return false;
  for (size_t i = 0; i + phrase.size() <= tokens.size(); ++i) {
    bool hit = true;
    for (size_t j = 0; j < phrase.size(); ++j) {
      if (tokens[i + j] != phrase[j]) {
        hit = false;
        break;
      }
    }
    if (hit) return true;
  }
  return false;
}

int evaluate_rule(const Rule& rule, const Document& doc, const ScoreTables& scores) {
  switch (rule.kind) {
    case SourceKind::kKeyword: {
      auto tokens = keyword_tokens(doc.text);
      for (const auto& kw : rule.keywords) {
        if (contains_token_seq(tokens, keyword_tokens(kw))) return rule.target;
      }
      return -1;
    }
    case SourceKind::kRegex:
      return std::regex_search(doc.text, rule.compiled) ? rule.target : -1;
    case SourceKind::kLength: {
      auto count = static_cast<double>(whitespace_token_count(doc.text));
      return cmp_apply(rule.cmp, count, static_cast<double>(rule.bound)) ? rule.target : -1;
    }
    case SourceKind::kExternal: {
      auto table = scores.find(rule.score_name);
      if (table == scores.end()) {
        throw std::runtime_error("unknown score table '" + rule.score_name + "'");
      }
      auto it = table->second.scores.find(doc.id);
      if (it == table->second.scores.end()) return -1;  // missing score: abstain
      return cmp_apply(rule.cmp, it->second, rule.threshold) ? rule.target : -1;
    }
  }
  return -1;
}

int WeakLabelMatrix::votes_cast(int64_t i) const {
  int c = 0;
  for (int j = 0; j < k; ++j) {
    if (vote(i, j) >= 0) ++c;
  }
  return c;
}

WeakLabelMatrix build_weak_label_matrix(const RuleSet& rules, std::span<const Document> docs,
                                        const ScoreTables& scores, ExecBackend backend) {
  WeakLabelMatrix m;
  m.n = static_cast<int64_t>(docs.size());
  m.k = static_cast<int>(rules.size());
  m.votes.assign(static_cast<size_t>(m.n) * m.k, -1);

  // external score tables are a precondition; check once up front so the
  // parallel loop stays exception-free
  for (const Rule& r : rules.rules) {
    if (r.kind == SourceKind::kExternal && !scores.count(r.score_name)) {
      throw std::runtime_error("unknown score table '" + r.score_name + "'");
    }
  }

  const int64_t n = m.n;
  if (backend == ExecBackend::kParallel) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
      for (int j = 0; j < m.k; ++j) {
        m.votes[static_cast<size_t>(i) * m.k + j] =
            evaluate_rule(rules.rules[static_cast<size_t>(j)], docs[static_cast<size_t>(i)], scores);
      }
    }
  } else {
    for (int64_t i = 0; i < n; ++i) {
      for (int j = 0; j < m.k; ++j) {
        m.votes[static_cast<size_t>(i) * m.k + j] =
            evaluate_rule(rules.rules[static_cast<size_t>(j)], docs[static_cast<size_t>(i)], scores);
      }
    }
  }
  return m;
}

MatchPartition partition_matched(const WeakLabelMatrix& m, int p) {
  if (p < 0 || p > m.k - 1) throw std::runtime_error("threshold p out of range");
  MatchPartition part;
  part.threshold_p = p;
  for (int64_t i = 0; i < m.n; ++i) {
    if (m.votes_cast(i) > p) {
      part.matched.push_back(i);
    } else {
      part.unmatched.push_back(i);
    }
  }
  return part;
}

std::vector<RuleStats> rule_stats(const WeakLabelMatrix& m,
                                  std::span<const std::optional<int>> gold) {
  std::vector<RuleStats> stats(static_cast<size_t>(m.k));
  for (int j = 0; j < m.k; ++j) {
    int64_t voted = 0, graded = 0, correct = 0;
    for (int64_t i = 0; i < m.n; ++i) {
      int32_t v = m.vote(i, j);
      if (v < 0) continue;
      ++voted;
      if (i < static_cast<int64_t>(gold.size()) && gold[static_cast<size_t>(i)].has_value()) {
        ++graded;
        if (*gold[static_cast<size_t>(i)] == v) ++correct;
      }
    }
    stats[static_cast<size_t>(j)].coverage =
        m.n == 0 ? 0.0 : static_cast<double>(voted) / static_cast<double>(m.n);
    if (graded > 0) {
      stats[static_cast<size_t>(j)].accuracy =
          static_cast<double>(correct) / static_cast<double>(graded);
    }
  }
  return stats;
}

void save_weak_matrix(const std::filesystem::path& path, const WeakLabelMatrix& m,
                      std::span<const Document> docs) {
  if (static_cast<int64_t>(docs.size()) != m.n) {
    throw std::runtime_error("matrix rows do not match corpus size");
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write matrix file '" + path.string() + "'");
  for (int64_t i = 0; i < m.n; ++i) {
    out << docs[static_cast<size_t>(i)].id;
    for (int j = 0; j < m.k; ++j) out << '\t' << m.vote(i, j);
    out << '\n';
  }
}

WeakLabelMatrix load_weak_matrix(const std::filesystem::path& path,
                                 std::span<const Document> docs) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open matrix file '" + path.string() + "'");
  WeakLabelMatrix m;
  m.n = static_cast<int64_t>(docs.size());
  m.k = -1;
  std::string line;
  int64_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (row >= m.n) throw std::runtime_error("matrix has more rows than the corpus");
    std::vector<int32_t> vals;
    size_t pos = line.find('\t');
    if (pos == std::string::npos) throw std::runtime_error("matrix row without votes");
    std::string id = line.substr(0, pos);
    if (id != docs[static_cast<size_t>(row)].id) {
      throw std::runtime_error("matrix row " + std::to_string(row + 1) + " id '" + id +
                               "' does not match corpus order");
    }
    while (pos != std::string::npos) {
      size_t next = line.find('\t', pos + 1);
      std::string field = line.substr(pos + 1, next == std::string::npos ? std::string::npos
                                                                         : next - pos - 1);
      int32_t v = static_cast<int32_t>(std::stol(field));
      if (v < -1) {
        throw std::runtime_error("vote below -1 at row " + std::to_string(row + 1));
      }
      vals.push_back(v);
      pos = next;
    }
    if (m.k < 0) {
      m.k = static_cast<int>(vals.size());
    } else if (static_cast<int>(vals.size()) != m.k) {
      throw std::runtime_error("inconsistent column count at row " + std::to_string(row + 1));
    }
    m.votes.insert(m.votes.end(), vals.begin(), vals.end());
    ++row;
  }
  if (row != m.n) throw std::runtime_error("matrix has fewer rows than the corpus");
  if (m.k < 0) m.k = 0;
  return m;
}

}  // namespace covote
