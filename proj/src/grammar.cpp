#include "cfdetect/grammar.hpp"

#include <set>

#include "cfdetect/error.hpp"
#include "cfdetect/io.hpp"
#include "embedded_data.hpp"

namespace cfd {

namespace {

constexpr std::array<std::string_view, kNumFamilies> kFamilyNames = {"VerbInversion", "ModalChunks", "WishVerbs",
                                                                     "IfClauses"};

PatternAtom parse_atom(std::string_view tok, std::size_t line) {
  if (tok.size() >= 2 && tok.front() == '<' && tok.back() == '>') tok = tok.substr(1, tok.size() - 2);
  PatternAtom atom;
  if (tok.ends_with(".*")) {
    atom.wildcard = true;
    tok.remove_suffix(2);
  }
  if (tok.empty()) throw FormatError("empty tag in pattern atom", line);
  for (char c : tok)
    if (!((c >= 'A' && c <= 'Z') || c == '$'))
      throw FormatError("malformed atom '" + std::string(tok) + "': tags use uppercase letters and '$' only", line);
  atom.tag_prefix = std::string(tok);
  return atom;
}

}  // namespace

std::string_view family_name(PatternFamily f) { return kFamilyNames[static_cast<std::size_t>(f)]; }

std::vector<double> GrammarFeatureVector::dense() const {
  std::vector<double> v;
  v.reserve(per_pattern.size() + per_family.size());
  for (auto b : per_pattern) v.push_back(b);
  for (auto b : per_family) v.push_back(b);
  return v;
}

Grammar parse_grammar(std::string_view text) {
  Grammar g;
  std::set<std::string> seen;
  const auto lines = io::split(text, '\n');
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::size_t line_no = n + 1;
    const auto line = io::trim(lines[n]);
    if (line.empty() || line.front() == '#') continue;

    const auto colon = line.find(':');
    if (colon == std::string_view::npos) throw FormatError("expected 'Family: ATOM ...'", line_no);
    const auto fam = io::trim(line.substr(0, colon));
    Pattern p;
    bool known = false;
    for (std::size_t f = 0; f < kNumFamilies; ++f) {
      if (fam == kFamilyNames[f]) {
        p.family = static_cast<PatternFamily>(f);
        known = true;
      }
    }
    if (!known) throw FormatError("unknown pattern family '" + std::string(fam) + "'", line_no);

    for (const auto& tok : io::split_ws(line.substr(colon + 1))) p.atoms.push_back(parse_atom(tok, line_no));
    if (p.atoms.empty()) throw FormatError("empty pattern", line_no);
    if (p.atoms.size() > Pattern::kMaxAtoms)
      throw FormatError("pattern longer than " + std::to_string(Pattern::kMaxAtoms) + " atoms", line_no);
    for (std::size_t k = 0; k < p.atoms.size(); ++k) {
      if (k) p.source_text += ' ';
      p.source_text += p.atoms[k].str();
    }
    if (!seen.insert(p.source_text).second) throw FormatError("duplicate pattern '" + p.source_text + "'", line_no);
    g.patterns.push_back(std::move(p));
  }
  return g;
}

Grammar parse_pattern_file(const std::filesystem::path& path) { return parse_grammar(io::read_file(path)); }

Grammar default_grammar() {
  static const Grammar kGrammar = parse_grammar(embedded::kDefaultPatterns);
  return kGrammar;
}

std::vector<std::size_t> match(const Pattern& pattern, const std::vector<std::string>& tags) {
  std::vector<std::size_t> starts;
  const std::size_t n = pattern.atoms.size();
  if (n == 0 || tags.size() < n) return starts;
  for (std::size_t i = 0; i + n <= tags.size(); ++i) {
    std::size_t j = 0;
    while (j < n && pattern.atoms[j].matches(tags[i + j])) ++j;
    if (j == n) starts.push_back(i);
  }
  return starts;
}

GrammarFeatureVector featurize(const Grammar& grammar, const std::vector<std::string>& tags) {
  GrammarFeatureVector v;
  v.per_pattern.resize(grammar.patterns.size(), 0);
  for (std::size_t k = 0; k < grammar.patterns.size(); ++k) {
    if (!match(grammar.patterns[k], tags).empty()) {
      v.per_pattern[k] = 1;
      v.per_family[static_cast<std::size_t>(grammar.patterns[k].family)] = 1;
    }
  }
  return v;
}

int rule_based_classify(const Grammar& grammar, const std::vector<std::string>& tags) {
  for (const auto& p : grammar.patterns)
    if (!match(p, tags).empty()) return 1;
  return 0;
}

}  // namespace cfd
