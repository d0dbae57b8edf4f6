#pragma once

// Corpus ingestion: documents, class catalog, precomputed embeddings and
// external per-document score tables, plus train/dev/test splitting.
//
// Corpus index i is the single join key: document i, embedding row i and
// weak-label row i always refer to the same text.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace covote {

enum class Split { kTrain, kDev, kTest };

const char* split_name(Split s);

struct ClassCatalog {
  std::vector<std::string> names;

  // throws on duplicate names or fewer than two classes
  static ClassCatalog from_names(std::vector<std::string> names);

  int index_of(const std::string& name) const;  // -1 when absent
  int size() const { return static_cast<int>(names.size()); }
};

struct Document {
  std::string id;
  std::string text;
  std::optional<int> gold_label;
  Split split = Split::kTrain;
};

// Row-major n x d matrix of 32-bit floats; training code widens rows to
// double on use.
struct EmbeddingMatrix {
  uint32_t n = 0;
  uint32_t d = 0;
  std::vector<float> values;

  std::span<const float> row(size_t i) const { return {values.data() + i * d, d}; }
};

struct ExternalScoreTable {
  std::string name;
  std::map<std::string, double> scores;  // document id -> value
};

// keyed by score name, e.g. "polarity"
using ScoreTables = std::map<std::string, ExternalScoreTable>;

// One JSON object per line with keys id, text, optional label, optional
// split ("train"|"dev"|"test", default train). Errors carry line numbers.
std::vector<Document> load_documents(const std::filesystem::path& path, const ClassCatalog& catalog);

// FNV-1a (64-bit) over the concatenated document ids; stored at the tail
// of the embedding file so row misalignment is caught at load time.
uint64_t fnv1a64(std::string_view bytes);
uint64_t corpus_id_hash(std::span<const Document> docs);

// Binary format: magic "WSE1", u32 n, u32 d, n*d little-endian f32
// row-major, u64 id hash.
EmbeddingMatrix load_embeddings(const std::filesystem::path& path, size_t expected_n,
                                uint64_t expected_id_hash);
EmbeddingMatrix load_embeddings(const std::filesystem::path& path, std::span<const Document> docs);
void save_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m,
                     uint64_t id_hash);

// Lines "doc_id<TAB>value"; table name defaults to the file stem.
ExternalScoreTable load_scores(const std::filesystem::path& path);
// throws when a score references an id not present in the corpus
void validate_scores(const ExternalScoreTable& table, std::span<const Document> docs);

struct SplitRatios {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
};

// Deterministic seeded shuffle; sizes are floor(ratio*n) with the
// remainder assigned to train. Overwrites any existing split fields.
void split_corpus(std::vector<Document>& docs, const SplitRatios& ratios, uint64_t seed);

std::vector<size_t> split_indices(std::span<const Document> docs, Split split);

}  // namespace covote
