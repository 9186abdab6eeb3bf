#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cfdetect/corpus.hpp"
#include "cfdetect/vectorize.hpp"

namespace cfd {

// Which per-token observations become CRF state features. Prefixes:
// w= (token), lw= (lowercased token), p= (POS), n= (NER), w-d= / w+d=
// (neighbouring tokens), p-d= / p+d= (neighbouring POS) for d = 1..window.
// Positions outside the sentence read "<S>" on the left and "</S>" on the right.
struct FeatureTemplateSet {
  bool use_token = true;
  bool use_lower_token = false;
  bool use_pos = true;
  bool use_ner = false;
  bool use_prev_next_token = false;
  bool use_prev_next_pos = false;
  int window = 1;

  void validate() const;
  // Space-separated "key=value" list, e.g. "token=1 pos=1 window=2".
  std::string to_string() const;
  static FeatureTemplateSet parse(std::string_view text);
  friend bool operator==(const FeatureTemplateSet&, const FeatureTemplateSet&) = default;
};

using FeatureStrings = std::vector<std::vector<std::string>>;
// Per-position feature ids into a model's feature index.
using FeatureIds = std::vector<std::vector<std::size_t>>;

// Throws ValidationError naming the template when a needed column is absent.
FeatureStrings extract_features(const TaggedSentence& tagged, const FeatureTemplateSet& templates);

inline constexpr std::size_t kNumChunkLabels = 3;

// Linear-chain CRF over the labels A, C, I (in that order).
// Parameter vector layout: state weights feature-major (feature * 3 + label),
// followed by the 3 x 3 transition matrix (prev * 3 + cur).
struct CrfModel {
  FeatureTemplateSet templates;
  std::vector<std::string> features;
  std::unordered_map<std::string, std::size_t> feature_index;
  DenseVector state_weights;
  std::array<double, 9> transition_weights{};
  double l2 = 0.0;

  std::size_t num_features() const { return features.size(); }
  std::size_t num_params() const { return state_weights.size() + transition_weights.size(); }

  // Returns the id of `feature`, adding it with zero weights when new.
  std::size_t add_feature(const std::string& feature);
  // -1 when unknown.
  long long feature_id(std::string_view feature) const;

  double& state(std::size_t feature, Chunk label) { return state_weights[feature * 3 + static_cast<std::size_t>(label)]; }
  double& transition(Chunk prev, Chunk cur) {
    return transition_weights[static_cast<std::size_t>(prev) * 3 + static_cast<std::size_t>(cur)];
  }

  DenseVector params() const;
  void set_params(const DenseVector& params);

  // Throws ValidationError if a weight table disagrees with the feature index.
  void validate() const;

  // Text format:
  //   cfdetect-crf v1
  //   templates <FeatureTemplateSet::to_string()>
  //   l2 <value>
  //   transitions                 (then 3 rows: from A, C, I; columns to A, C, I)
  //   features <count>            (then one "feature<TAB>wA<TAB>wC<TAB>wI" line each)
  std::string serialize() const;
  static CrfModel deserialize(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static CrfModel load(const std::filesystem::path& path);
};

// Unknown features are dropped.
FeatureIds encode_features(const CrfModel& model, const FeatureStrings& features);

struct CrfInstance {
  FeatureIds features;
  std::vector<Chunk> labels;
};

// Unnormalized score of a label sequence.
double sequence_score(const CrfModel& model, const FeatureIds& x, const std::vector<Chunk>& y);
// log Z(x) by the forward recursion in log space.
double log_partition(const CrfModel& model, const FeatureIds& x);

// Sum of log p(y|x) over the batch minus (l2/2)||w||^2, and its gradient
// (empirical minus expected feature counts minus l2 * w). `jobs` splits the
// batch into contiguous chunks whose partial gradients are summed in order.
std::pair<double, DenseVector> log_likelihood_and_gradient(const CrfModel& model, const std::vector<CrfInstance>& batch,
                                                           std::size_t jobs = 1);

// Exact argmax. Among equally scored sequences the one whose labels are
// smallest in the order A < C < I, compared left to right, wins.
std::vector<Chunk> viterbi(const CrfModel& model, const FeatureIds& x);
std::vector<Chunk> viterbi(const CrfModel& model, const FeatureStrings& x);

// Per-position distribution over (A, C, I).
std::vector<std::array<double, 3>> marginals(const CrfModel& model, const FeatureIds& x);

// Covering byte span of the A tokens and of the C tokens; absent when a label
// does not occur.
SpanAnnotation labels_to_spans(const std::vector<Chunk>& labels, const std::vector<CharSpan>& offsets);

enum class Optimizer { SGD, LBFGS };

struct TrainConfig {
  // Passes over the data for SGD, iterations for L-BFGS.
  int epochs = 100;
  // SGD step size; L-BFGS picks its own steps.
  double learning_rate = 0.1;
  double l2 = 1.0;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::LBFGS;
  // Worker threads for the gradient computation.
  std::size_t jobs = 1;

  void validate() const;
};

Optimizer parse_optimizer(std::string_view name);
std::string_view optimizer_name(Optimizer o);

// Sentences must carry gold chunks. The feature index is built from the
// training data. When `log` is set, the objective is written there per epoch.
CrfModel train_crf(const std::vector<TaggedSentence>& data, const FeatureTemplateSet& templates, const TrainConfig& cfg,
                   std::ostream* log = nullptr);

// Extract, encode and decode one sentence.
std::vector<Chunk> predict_chunks(const CrfModel& model, const TaggedSentence& tagged);

}  // namespace cfd
