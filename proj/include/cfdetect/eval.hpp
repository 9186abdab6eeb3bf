#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cfdetect/classify.hpp"
#include "cfdetect/corpus.hpp"
#include "cfdetect/crf.hpp"

namespace cfd {

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  // Class 1 is positive. Throws ValidationError on a length mismatch.
  static Confusion from_labels(const std::vector<int>& pred, const std::vector<int>& gold);
  // The same counts seen with class 0 as the positive class.
  Confusion swapped() const { return {tn, fn, fp, tp}; }
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Zero denominators give zero.
Prf prf1(const Confusion& c);
Prf prf1(double precision, double recall);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double support = 0.0;
};

// Scores of one evaluation, or of k folds. For a k-fold report `mean` and
// `stddev` (sample, n - 1) hold every per-fold metric, and the headline and
// per-class fields hold fold means.
struct EvalReport {
  std::string title;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> accuracy;
  std::optional<double> exact_match;
  std::map<std::string, ClassScores> per_class;

  std::size_t folds = 0;
  std::map<std::string, double> mean;
  std::map<std::string, double> stddev;

  // Flat metric map used when aggregating folds.
  std::map<std::string, double> metrics() const;

  std::string to_table() const;
  // Keys: title, precision, recall, f1, accuracy, exact_match, per_class,
  // folds, mean, stddev (absent fields are omitted).
  std::string to_json() const;
};

// Per-class scores for classes "0" and "1"; headline is class 1.
EvalReport classification_report(const std::vector<int>& pred, const std::vector<int>& gold);

// Micro-averaged over tokens whose gold or predicted label is A or C, plus
// per-label rows "A" and "C". `ids` names sentences in error messages.
EvalReport token_chunk_f1(const std::vector<std::vector<Chunk>>& pred, const std::vector<std::vector<Chunk>>& gold,
                          const std::vector<std::string>& ids = {});

// Fraction of sentences whose antecedent and consequent both equal gold.
double exact_match(const std::vector<SpanAnnotation>& pred, const std::vector<SpanAnnotation>& gold);
// Matched by sentence id; the two id sets must be identical.
double exact_match(const std::vector<Task2Item>& pred, const std::vector<Task2Item>& gold);

struct FoldPlan {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> assignments;

  std::vector<std::size_t> test_indices(std::size_t fold) const;
  std::vector<std::size_t> train_indices(std::size_t fold) const;
};

// Shuffles each class with the seed and deals it round robin over the folds,
// continuing where the previous class stopped. A class with fewer than k
// members is an error; with allow_empty_class an entirely absent class is
// tolerated.
FoldPlan stratified_kfold(const std::vector<int>& y, std::size_t k, std::uint64_t seed, bool allow_empty_class = false);

struct CvOptions {
  std::size_t k = 3;
  std::uint64_t seed = 0;
  // Folds evaluated concurrently.
  std::size_t jobs = 1;
};

// Per fold: precision, recall, f1 (class 1), accuracy, precision_0,
// recall_0, f1_0.
EvalReport cross_validate(const ClassifierSpec& spec, const Dataset& data, const CvOptions& options);

// Folds are stratified by whether a sentence has an antecedent. Per fold:
// precision, recall, f1 (token micro), f1_A, f1_C, exact_match.
EvalReport cross_validate_crf(const std::vector<TaggedSentence>& data, const FeatureTemplateSet& templates,
                              const TrainConfig& cfg, const CvOptions& options);

// CRF predictions against gold chunks: token scores plus exact match of the
// spans recovered from each label sequence.
EvalReport chunk_report(const std::vector<TaggedSentence>& gold, const std::vector<std::vector<Chunk>>& pred);

// Token offsets of a sentence, or offsets into the space-joined tokens when
// the sentence carries none.
std::vector<CharSpan> token_offsets(const TaggedSentence& s);

}  // namespace cfd
