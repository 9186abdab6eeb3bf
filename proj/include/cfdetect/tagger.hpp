#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cfdetect/corpus.hpp"

namespace cfd {

// Averaged-perceptron POS tagger with greedy left-to-right decoding. Used
// when pre-computed Penn Treebank tags are not available.
class TaggerModel {
 public:
  TaggerModel() = default;

  const std::set<std::string>& tagset() const { return tagset_; }
  bool averaged() const { return averaged_; }
  std::size_t num_features() const { return weights_.size(); }

  // Weight of (feature, tag); 0 when absent.
  double weight(const std::string& feature, const std::string& tag) const;

  // Text format: a header line "#tagset<TAB>TAG<TAB>TAG...", then one
  // "feature<TAB>tag<TAB>weight" line per non-zero weight.
  std::string serialize() const;
  static TaggerModel deserialize(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static TaggerModel load(const std::filesystem::path& path);

 private:
  friend TaggerModel train_tagger(const std::vector<TaggedSentence>&, int, std::uint64_t);
  friend std::vector<std::string> tag(const TaggerModel&, const std::vector<std::string>&);

  std::set<std::string> tagset_;
  // feature -> (tag -> weight)
  std::unordered_map<std::string, std::map<std::string, double>> weights_;
  bool averaged_ = false;
};

// Feature strings for position i given the previously predicted tag.
std::vector<std::string> tagger_features(const std::vector<std::string>& tokens, std::size_t i,
                                         const std::string& prev_tag);

// Throws TrainingError on empty data or epochs < 1.
TaggerModel train_tagger(const std::vector<TaggedSentence>& data, int epochs, std::uint64_t seed);

// Ties between equal scores go to the lexicographically smallest tag.
std::vector<std::string> tag(const TaggerModel& model, const std::vector<std::string>& tokens);

struct TagNormalization {
  std::set<std::string> modal_lexemes = {"could", "would", "should"};
  bool negation_to_rp = true;
  bool wish_disambiguation = true;
};

// Forces modal lexemes to MD, negations ("not", "n't") to RP, "wish" after a
// pronoun or noun subject to VBP and "wishes" after a determiner or
// possessive to NNS. Adverbs between the subject and "wish" are skipped.
TaggedSentence normalize_tags(const TaggedSentence& tagged, const TagNormalization& norm = {});

}  // namespace cfd
