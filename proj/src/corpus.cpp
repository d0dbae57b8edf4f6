#include "covote/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "covote/binio.hpp"
#include "json.hpp"

namespace covote {

using nlohmann::json;

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "?";
}

static std::optional<Split> parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "test") return Split::kTest;
  return std::nullopt;
}

ClassCatalog ClassCatalog::from_names(std::vector<std::string> names) {
  if (names.size() < 2) throw std::runtime_error("class catalog needs at least two classes");
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) throw std::runtime_error("duplicate class name '" + n + "'");
  }
  return ClassCatalog{std::move(names)};
}

int ClassCatalog::index_of(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<Document> load_documents(const std::filesystem::path& path, const ClassCatalog& catalog) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open documents file '" + path.string() + "'");

  std::vector<Document> docs;
  std::set<std::string> ids;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception&) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": malformed record");
    }
    if (!rec.is_object() || !rec.contains("id") || !rec["id"].is_string() ||
        !rec.contains("text") || !rec["text"].is_string()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": record needs string fields id and text");
    }
    Document doc;
    doc.id = rec["id"].get<std::string>();
    doc.text = rec["text"].get<std::string>();
    if (!ids.insert(doc.id).second) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": duplicate id '" +
                               doc.id + "'");
    }
    if (rec.contains("label")) {
      if (!rec["label"].is_string()) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                 ": label must be a string");
      }
      const std::string label = rec["label"].get<std::string>();
      int idx = catalog.index_of(label);
      if (idx < 0) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                 ": unknown class '" + label + "'");
      }
      doc.gold_label = idx;
    }
    if (rec.contains("split")) {
      if (!rec["split"].is_string()) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                 ": split must be a string");
      }
      auto s = parse_split(rec["split"].get<std::string>());
      if (!s) {
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                 ": split must be train, dev or test");
      }
      doc.split = *s;
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

uint64_t corpus_id_hash(std::span<const Document> docs) {
  uint64_t h = 14695981039346656037ULL;
  for (const auto& d : docs) {
    for (unsigned char c : d.id) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, size_t expected_n,
                                uint64_t expected_id_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open embeddings file '" + path.string() + "'");
  binio::expect_magic(in, "WSE1", "embeddings");
  EmbeddingMatrix m;
  m.n = binio::read_u32(in);
  m.d = binio::read_u32(in);
  if (m.n != expected_n) {
    throw std::runtime_error("embedding count mismatch: file has " + std::to_string(m.n) +
                             " rows, corpus has " + std::to_string(expected_n));
  }
  if (m.d == 0) throw std::runtime_error("embedding dimension must be positive");
  m.values.resize(static_cast<size_t>(m.n) * m.d);
  for (size_t i = 0; i < m.values.size(); ++i) {
    m.values[i] = binio::read_f32(in);
    if (!std::isfinite(m.values[i])) {
      throw std::runtime_error("non-finite embedding value at index " + std::to_string(i));
    }
  }
  uint64_t hash = binio::read_u64(in);
  if (hash != expected_id_hash) {
    throw std::runtime_error("embedding id hash mismatch: rows are not aligned with this corpus");
  }
  if (in.peek() != EOF) throw std::runtime_error("trailing bytes after embedding payload");
  return m;
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, std::span<const Document> docs) {
  return load_embeddings(path, docs.size(), corpus_id_hash(docs));
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m,
                     uint64_t id_hash) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write embeddings file '" + path.string() + "'");
  binio::write_magic(out, "WSE1");
  binio::write_u32(out, m.n);
  binio::write_u32(out, m.d);
  for (float v : m.values) binio::write_f32(out, v);
  binio::write_u64(out, id_hash);
}

ExternalScoreTable load_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scores file '" + path.string() + "'");
  ExternalScoreTable table;
  table.name = path.stem().string();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": expected doc_id<TAB>value");
    }
    std::string id = line.substr(0, tab);
    double value = 0;
    try {
      size_t used = 0;
      value = std::stod(line.substr(tab + 1), &used);
      if (used != line.size() - tab - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad score value");
    }
    table.scores[id] = value;
  }
  return table;
}

void validate_scores(const ExternalScoreTable& table, std::span<const Document> docs) {
  std::set<std::string> ids;
  for (const auto& d : docs) ids.insert(d.id);
  for (const auto& [id, _] : table.scores) {
    if (!ids.count(id)) {
      throw std::runtime_error("score table '" + table.name + "' references unknown document '" +
                               id + "'");
    }
  }
}

void split_corpus(std::vector<Document>& docs, const SplitRatios& ratios, uint64_t seed) {
  if (ratios.train < 0 || ratios.dev < 0 || ratios.test < 0) {
    throw std::runtime_error("split ratios must be nonnegative");
  }
  if (std::abs(ratios.train + ratios.dev + ratios.test - 1.0) > 1e-9) {
    throw std::runtime_error("split ratios must sum to 1");
  }
  const size_t n = docs.size();
  if (n < 3 && ratios.train > 0 && ratios.dev > 0 && ratios.test > 0) {
    throw std::runtime_error("split too small");
  }

  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  // Fisher-Yates with our own bound sampling, so the assignment does not
  // depend on the standard library's distribution implementation.
  std::mt19937_64 rng(seed);
  for (size_t i = n; i > 1; --i) {
    size_t j = static_cast<size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }

  // tiny bias so decimal ratios like 0.7 floor to the intended size
  const size_t n_dev = static_cast<size_t>(std::floor(ratios.dev * static_cast<double>(n) + 1e-9));
  const size_t n_test = static_cast<size_t>(std::floor(ratios.test * static_cast<double>(n) + 1e-9));
  // remainder goes to train
  const size_t n_train = n - n_dev - n_test;
  for (size_t pos = 0; pos < n; ++pos) {
    Split s = pos < n_train            ? Split::kTrain
              : pos < n_train + n_dev  ? Split::kDev
                                       : Split::kTest;
    docs[order[pos]].split = s;
  }
}

std::vector<size_t> split_indices(std::span<const Document> docs, Split split) {
  std::vector<size_t> out;
  for (size_t i = 0; i < docs.size(); ++i) {
    if (docs[i].split == split) out.push_back(i);
  }
  return out;
}

}  // namespace covote
