#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cfdetect/grammar.hpp"
#include "cfdetect/tagger.hpp"
#include "cfdetect/textprep.hpp"
#include "cfdetect/vectorize.hpp"

namespace cfd {

enum class VectorizerKind { BOW, TFIDF, EMBEDDING, GRAMMAR };

std::string_view vectorizer_name(VectorizerKind k);
VectorizerKind parse_vectorizer(std::string_view name);

struct VectorizerConfig {
  VectorizerKind kind = VectorizerKind::TFIDF;
  // BOW / TFIDF: terms in fewer documents are dropped.
  std::size_t min_freq = 5;
  // EMBEDDING: word vector file.
  std::filesystem::path embeddings;
  // GRAMMAR: POS tagger model (required) and pattern file (built-in when empty).
  std::filesystem::path tagger_model;
  std::filesystem::path patterns;

  // Checks values and that referenced files exist (IoError when missing).
  void validate() const;
};

// Raw sentence -> feature vector: cleaning, then one of the vectorizers.
// The grammar vectorizer tags the raw sentence instead of the cleaned one.
class TextPipeline {
 public:
  TextPipeline(CleaningProfile cleaning, StopwordSet stopwords, VectorizerConfig vectorizer);

  // Builds the vocabulary (BOW/TFIDF) or loads the resources the vectorizer
  // needs.
  void fit(const std::vector<std::string>& texts);
  bool fitted() const { return fitted_; }

  std::vector<std::string> tokens(std::string_view text) const;
  SparseVector transform(std::string_view text) const;
  std::size_t dim() const;

  const CleaningProfile& cleaning() const { return cleaning_; }
  const VectorizerConfig& vectorizer() const { return vectorizer_; }
  const Vocabulary& vocabulary() const { return vocab_; }

  // Directory with pipeline.json plus vocab.tsv / stopwords.txt /
  // tagger.model / grammar.patterns as needed.
  void save(const std::filesystem::path& dir) const;
  static TextPipeline load(const std::filesystem::path& dir);

 private:
  CleaningProfile cleaning_;
  StopwordSet stopwords_;
  VectorizerConfig vectorizer_;
  bool fitted_ = false;
  Vocabulary vocab_;
  std::shared_ptr<const EmbeddingTable> embeddings_;
  std::shared_ptr<const TaggerModel> tagger_;
  std::shared_ptr<const Grammar> grammar_;
};

}  // namespace cfd
