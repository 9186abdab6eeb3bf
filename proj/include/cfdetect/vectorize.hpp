#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace cfd {

using DenseVector = std::vector<double>;

// Sorted (position, value) pairs without explicit zeros.
struct SparseVector {
  std::vector<std::pair<std::size_t, double>> entries;
  std::size_t dim = 0;

  static SparseVector from_dense(const DenseVector& v);
  DenseVector to_dense() const;
  double get(std::size_t i) const;
  double norm() const;
  double dot(const DenseVector& w) const;
  // Throws ValidationError on out-of-range positions, unsorted positions or
  // explicit zeros.
  void validate() const;
};

using TokenList = std::vector<std::string>;

class Vocabulary {
 public:
  Vocabulary() = default;

  std::size_t size() const { return terms_.size(); }
  const std::vector<std::string>& terms() const { return terms_; }
  // Position of `term`, or -1 when out of vocabulary.
  long long index(std::string_view term) const;
  std::size_t doc_freq(std::size_t i) const { return doc_freq_[i]; }
  std::size_t n_docs() const { return n_docs_; }
  std::size_t min_freq() const { return min_freq_; }

  std::string serialize() const;
  static Vocabulary deserialize(std::string_view text);

 private:
  friend Vocabulary build_vocab(const std::vector<TokenList>&, std::size_t);

  std::vector<std::string> terms_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::size_t> doc_freq_;
  std::size_t n_docs_ = 0;
  std::size_t min_freq_ = 1;
};

// Terms sorted lexicographically; terms present in fewer than min_freq
// documents are dropped.
Vocabulary build_vocab(const std::vector<TokenList>& docs, std::size_t min_freq);

// Raw counts of in-vocabulary tokens.
SparseVector bow(const TokenList& doc, const Vocabulary& vocab);

// count * (ln((1 + n_docs) / (1 + df)) + 1), then L2-normalized (skipped for
// the zero vector).
SparseVector tfidf_transform(const TokenList& doc, const Vocabulary& vocab);
double smooth_idf(std::size_t n_docs, std::size_t doc_freq);

struct EmbeddingTable {
  std::size_t dim = 0;
  std::unordered_map<std::string, DenseVector> vectors;

  // "word v1 ... vdim" per line; an optional "count dim" header line.
  static EmbeddingTable parse(std::string_view text);
  static EmbeddingTable load(const std::filesystem::path& path);
};

// Mean of the in-table token vectors; zero vector when none is in the table.
DenseVector embed_average(const TokenList& doc, const EmbeddingTable& table);

// "sentenceID<TAB>v1 v2 ... vdim" per line; all rows share one dimension.
std::map<std::string, DenseVector> parse_sentence_vectors(std::string_view text);
std::map<std::string, DenseVector> load_sentence_vectors(const std::filesystem::path& path);

}  // namespace cfd
