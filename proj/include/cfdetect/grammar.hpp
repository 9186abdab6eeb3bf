#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cfd {

enum class PatternFamily : std::uint8_t { VerbInversion = 0, ModalChunks = 1, WishVerbs = 2, IfClauses = 3 };
inline constexpr std::size_t kNumFamilies = 4;

std::string_view family_name(PatternFamily f);

// One tag slot. A wildcard atom matches any tag starting with tag_prefix;
// otherwise the tag must equal tag_prefix.
struct PatternAtom {
  std::string tag_prefix;
  bool wildcard = false;

  bool matches(std::string_view tag) const {
    return wildcard ? tag.starts_with(tag_prefix) : tag == tag_prefix;
  }
  std::string str() const { return wildcard ? tag_prefix + ".*" : tag_prefix; }
};

struct Pattern {
  static constexpr std::size_t kMaxAtoms = 12;

  std::vector<PatternAtom> atoms;
  PatternFamily family = PatternFamily::IfClauses;
  std::string source_text;  // atoms joined by single spaces
};

struct Grammar {
  std::vector<Pattern> patterns;

  std::size_t feature_dim() const { return patterns.size() + kNumFamilies; }
};

struct GrammarFeatureVector {
  std::vector<std::uint8_t> per_pattern;
  std::array<std::uint8_t, kNumFamilies> per_family{};

  // per_pattern followed by per_family, as 0.0 / 1.0.
  std::vector<double> dense() const;
};

// "Family: ATOM ATOM ..." lines; blank lines and '#' comments are skipped.
// Throws FormatError with the line number on unknown families, empty or
// oversized patterns, malformed atoms and duplicate patterns.
Grammar parse_grammar(std::string_view text);
Grammar parse_pattern_file(const std::filesystem::path& path);

// The grammar shipped in data/counterfactual.patterns.
Grammar default_grammar();

// Every start index where the pattern matches, overlapping occurrences included.
std::vector<std::size_t> match(const Pattern& pattern, const std::vector<std::string>& tags);

GrammarFeatureVector featurize(const Grammar& grammar, const std::vector<std::string>& tags);

// 1 iff any pattern matches.
int rule_based_classify(const Grammar& grammar, const std::vector<std::string>& tags);

}  // namespace cfd
