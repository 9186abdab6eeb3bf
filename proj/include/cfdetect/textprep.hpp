#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace cfd {

// Cleaning stages. Enabled stages always run in this order:
// expand contractions, split compounds, lowercase, strip numbers,
// strip punctuation, drop single-character tokens, remove stopwords, stem,
// collapse whitespace.
struct CleaningProfile {
  bool lowercase = false;
  bool strip_numbers = false;
  bool strip_punct = false;
  bool expand_contractions = false;
  bool split_compounds = false;
  bool drop_single_char_tokens = false;
  bool remove_stopwords = false;
  bool stem = false;
  bool collapse_whitespace = false;

  // Throws ValidationError when stem is set without strip_punct.
  void validate() const;

  // Named presets: "none", "cleaning", "cleaning_no_stopwords",
  // "normalization". Throws ValidationError on an unknown name.
  static CleaningProfile preset(std::string_view name);
};

class StopwordSet {
 public:
  StopwordSet() = default;
  explicit StopwordSet(std::set<std::string> words) : words_(std::move(words)) {}

  // The bundled English list (data/stopwords_en.txt).
  static StopwordSet english();
  // One token per line, '#' starts a comment line.
  static StopwordSet parse(std::string_view text);
  static StopwordSet load(const std::filesystem::path& path);

  bool contains(std::string_view w) const { return words_.find(std::string(w)) != words_.end(); }
  bool empty() const { return words_.empty(); }
  std::size_t size() const { return words_.size(); }
  const std::set<std::string>& words() const { return words_; }

 private:
  std::set<std::string> words_;
};

std::string clean(std::string_view text, const CleaningProfile& profile, const StopwordSet& stopwords);

// Individual stages, exposed for reuse and testing.
std::string expand_contractions(std::string_view text);
std::string split_compounds(std::string_view text);

// Porter (1980) suffix stripper. Words of length <= 2 are returned as is.
std::string stem(std::string_view word);

std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens, const StopwordSet& stopwords);

}  // namespace cfd
