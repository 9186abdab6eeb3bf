#include "cfdetect/textprep.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <utility>

#include "cfdetect/error.hpp"
#include "cfdetect/io.hpp"
#include "embedded_data.hpp"

namespace cfd {

namespace {

constexpr std::string_view kRightQuote = "\xE2\x80\x99";
constexpr std::string_view kLeftQuote = "\xE2\x80\x98";

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::size_t utf8_length(std::string_view s) {
  std::size_t n = 0;
  for (char c : s)
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
  return n;
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::string expand_word(std::string_view word) {
  std::string norm;
  for (std::size_t i = 0; i < word.size();) {
    if (word.substr(i, 3) == kRightQuote) {
      norm += '\'';
      i += 3;
    } else {
      norm += word[i++];
    }
  }
  std::string lower = norm;
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

  auto with_case = [&](std::string s) {
    if (!norm.empty() && std::isupper(static_cast<unsigned char>(norm[0])) && !s.empty())
      s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
  };
  if (lower == "won't") return with_case("will not");
  if (lower == "can't") return with_case("can not");

  static const std::array<std::pair<std::string_view, std::string_view>, 6> kRules = {{
      {"n't", "not"}, {"'re", "are"}, {"'m", "am"}, {"'ve", "have"}, {"'ll", "will"}, {"'d", "would"}}};
  for (const auto& [suffix, full] : kRules) {
    if (lower.size() >= suffix.size() && lower.compare(lower.size() - suffix.size(), suffix.size(), suffix) == 0) {
      const std::string prefix = norm.substr(0, norm.size() - suffix.size());
      if (prefix.empty()) return with_case(std::string(full));
      return prefix + " " + std::string(full);
    }
  }
  return std::string(word);
}

}  // namespace

void CleaningProfile::validate() const {
  if (stem && !strip_punct) throw ValidationError("cleaning profile: stem requires strip_punct");
}

CleaningProfile CleaningProfile::preset(std::string_view name) {
  CleaningProfile p;
  if (name == "none") return p;
  p.expand_contractions = true;
  p.split_compounds = true;
  p.lowercase = true;
  p.strip_numbers = true;
  p.strip_punct = true;
  p.drop_single_char_tokens = true;
  p.collapse_whitespace = true;
  if (name == "cleaning") return p;
  if (name == "cleaning_no_stopwords") {
    p.remove_stopwords = true;
    return p;
  }
  if (name == "normalization") {
    p.stem = true;
    return p;
  }
  throw ValidationError("unknown cleaning profile '" + std::string(name) + "'");
}

StopwordSet StopwordSet::english() {
  static const StopwordSet kEnglish = parse(embedded::kStopwordsEn);
  return kEnglish;
}

StopwordSet StopwordSet::parse(std::string_view text) {
  std::set<std::string> words;
  for (const auto& raw : io::split(text, '\n')) {
    const auto line = io::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    words.emplace(line);
  }
  return StopwordSet(std::move(words));
}

StopwordSet StopwordSet::load(const std::filesystem::path& path) { return parse(io::read_file(path)); }

std::string expand_contractions(std::string_view text) {
  std::string out;
  std::size_t i = 0;
  auto word_byte_len = [&](std::size_t k) -> std::size_t {
    if (is_alnum(text[k]) || text[k] == '\'') return 1;
    if (text.substr(k, 3) == kRightQuote) return 3;
    return 0;
  };
  while (i < text.size()) {
    const std::size_t start = i;
    while (i < text.size()) {
      const auto len = word_byte_len(i);
      if (!len) break;
      i += len;
    }
    if (i > start) {
      out += expand_word(text.substr(start, i - start));
    } else {
      out += text[i++];
    }
  }
  return out;
}

std::string split_compounds(std::string_view text) {
  std::string out(text);
  for (std::size_t i = 1; i + 1 < text.size(); ++i)
    if (text[i] == '-' && is_alnum(text[i - 1]) && is_alnum(text[i + 1])) out[i] = ' ';
  return out;
}

std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens, const StopwordSet& stopwords) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens)
    if (!stopwords.contains(t)) out.push_back(t);
  return out;
}

std::string clean(std::string_view text, const CleaningProfile& profile, const StopwordSet& stopwords) {
  profile.validate();
  if (profile.remove_stopwords && stopwords.empty())
    throw ValidationError("cleaning profile removes stopwords but the stopword set is empty");

  std::string s(text);
  if (profile.expand_contractions) s = expand_contractions(s);
  if (profile.split_compounds) s = split_compounds(s);
  if (profile.lowercase)
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (profile.strip_numbers) std::erase_if(s, [](char c) { return c >= '0' && c <= '9'; });
  if (profile.strip_punct) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
      const std::string_view rest = std::string_view(s).substr(i);
      if (rest.starts_with(kRightQuote) || rest.starts_with(kLeftQuote)) {
        out += '\'';
        i += 3;
        continue;
      }
      const char c = s[i++];
      out += (is_alnum(c) && static_cast<unsigned char>(c) < 0x80) || c == '\'' ? c : ' ';
    }
    s = std::move(out);
  }

  if (profile.drop_single_char_tokens || profile.remove_stopwords || profile.stem) {
    auto tokens = io::split_ws(s);
    if (profile.drop_single_char_tokens)
      std::erase_if(tokens, [](const std::string& t) { return utf8_length(t) <= 1; });
    if (profile.remove_stopwords) tokens = remove_stopwords(tokens, stopwords);
    if (profile.stem) {
      for (auto& t : tokens) {
        const bool alpha = std::all_of(t.begin(), t.end(), [](char c) { return c >= 'a' && c <= 'z'; });
        if (alpha) t = cfd::stem(t);
      }
    }
    s = join(tokens);
  }

  if (profile.collapse_whitespace) s = join(io::split_ws(s));
  return s;
}

}  // namespace cfd
