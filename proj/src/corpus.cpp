#include "cfdetect/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "cfdetect/csv.hpp"
#include "cfdetect/io.hpp"

namespace cfd {

namespace {

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void require_fields(const csv::Row& row, std::size_t n) {
  if (row.fields.size() != n)
    throw FormatError("expected " + std::to_string(n) + " fields, found " + std::to_string(row.fields.size()), row.line);
}

}  // namespace

void validate_annotation(const SpanAnnotation& ann, std::size_t text_len) {
  for (const auto* span : {&ann.antecedent, &ann.consequent}) {
    if (!*span) continue;
    const auto& s = **span;
    if (s.start >= s.end || s.end > text_len)
      throw ValidationError("span [" + std::to_string(s.start) + ", " + std::to_string(s.end) +
                            ") invalid for text of length " + std::to_string(text_len));
  }
  if (ann.antecedent && ann.consequent && ann.antecedent->overlaps(*ann.consequent))
    throw ValidationError("antecedent and consequent spans overlap");
}

char chunk_char(Chunk c) {
  switch (c) {
    case Chunk::A: return 'A';
    case Chunk::C: return 'C';
    case Chunk::I: return 'I';
  }
  return '?';
}

std::optional<Chunk> parse_chunk(std::string_view s) {
  if (s == "A") return Chunk::A;
  if (s == "C") return Chunk::C;
  if (s == "I") return Chunk::I;
  return std::nullopt;
}

void TaggedSentence::validate() const {
  const std::size_t n = tokens.size();
  if (tags.size() != n) throw ValidationError("sentence '" + id + "': tag count differs from token count");
  if (!ner.empty() && ner.size() != n) throw ValidationError("sentence '" + id + "': NER count differs from token count");
  if (!chunks.empty() && chunks.size() != n)
    throw ValidationError("sentence '" + id + "': chunk count differs from token count");
  if (offsets.size() != n) throw ValidationError("sentence '" + id + "': offset count differs from token count");
  for (std::size_t i = 0; i < n; ++i) {
    if (offsets[i].start >= offsets[i].end) throw ValidationError("sentence '" + id + "': empty token offset");
    if (i > 0 && offsets[i].start < offsets[i - 1].end)
      throw ValidationError("sentence '" + id + "': token offsets overlap or are out of order");
  }
}

// --- Task files ---------------------------------------------------------

std::vector<LabeledSentence> parse_task1_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty()) throw FormatError("missing header row", 1);
  const csv::Header header(rows.front());
  const auto id_col = header.require("sentenceID");
  const auto label_col = header.require("gold_label");
  const auto text_col = header.require("sentence");

  std::vector<LabeledSentence> out;
  std::set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    require_fields(row, header.size());
    LabeledSentence item;
    item.sentence.id = std::string(io::trim(row.fields[id_col]));
    item.sentence.text = row.fields[text_col];
    const auto label = io::trim(row.fields[label_col]);
    if (label == "0") {
      item.label = 0;
    } else if (label == "1") {
      item.label = 1;
    } else {
      throw FormatError("gold_label must be 0 or 1, got '" + std::string(label) + "'", row.line);
    }
    if (item.sentence.id.empty()) throw FormatError("empty sentenceID", row.line);
    if (item.sentence.text.empty()) throw FormatError("empty sentence", row.line);
    if (!seen.insert(item.sentence.id).second)
      throw FormatError("duplicate sentenceID '" + item.sentence.id + "'", row.line);
    out.push_back(std::move(item));
  }
  return out;
}

std::vector<LabeledSentence> load_task1_csv(const std::filesystem::path& path) {
  return parse_task1_csv(io::read_file(path));
}

std::vector<Task2Item> parse_task2_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty()) throw FormatError("missing header row", 1);
  const csv::Header header(rows.front());
  const auto id_col = header.require("sentenceID");
  const auto text_col = header.require("sentence");
  const std::array<std::size_t, 4> span_cols = {
      header.require("antecedent_startid"), header.require("antecedent_endid"),
      header.require("consequent_startid"), header.require("consequent_endid")};

  std::vector<Task2Item> out;
  std::set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    require_fields(row, header.size());
    Task2Item item;
    item.sentence.id = std::string(io::trim(row.fields[id_col]));
    item.sentence.text = row.fields[text_col];
    if (item.sentence.id.empty()) throw FormatError("empty sentenceID", row.line);
    if (item.sentence.text.empty()) throw FormatError("empty sentence", row.line);
    if (!seen.insert(item.sentence.id).second)
      throw FormatError("duplicate sentenceID '" + item.sentence.id + "'", row.line);

    auto read_span = [&](std::size_t start_col, std::size_t end_col, const char* what) -> std::optional<CharSpan> {
      long long start = 0, end = 0;
      try {
        start = io::parse_int(row.fields[start_col]);
        end = io::parse_int(row.fields[end_col]);
      } catch (const FormatError& e) {
        throw FormatError(std::string(what) + ": " + e.what(), row.line);
      }
      if (start == -1 && end == -1) return std::nullopt;
      if (start < 0 || end < start)
        throw FormatError(std::string(what) + " ids (" + std::to_string(start) + ", " + std::to_string(end) +
                              ") are not a valid range",
                          row.line);
      if (static_cast<std::size_t>(end) + 1 > item.sentence.text.size())
        throw FormatError(std::string(what) + " end id " + std::to_string(end) + " exceeds sentence length " +
                              std::to_string(item.sentence.text.size()),
                          row.line);
      return CharSpan{static_cast<std::size_t>(start), static_cast<std::size_t>(end) + 1};
    };
    item.spans.antecedent = read_span(span_cols[0], span_cols[1], "antecedent");
    item.spans.consequent = read_span(span_cols[2], span_cols[3], "consequent");
    if (item.spans.antecedent && item.spans.consequent && item.spans.antecedent->overlaps(*item.spans.consequent))
      throw FormatError("antecedent and consequent overlap", row.line);
    out.push_back(std::move(item));
  }
  return out;
}

std::vector<Task2Item> load_task2_csv(const std::filesystem::path& path) {
  return parse_task2_csv(io::read_file(path));
}

std::string format_task2_csv(const std::vector<Task2Item>& items) {
  std::string out = csv::format_row({"sentenceID", "sentence", "antecedent_startid", "antecedent_endid",
                                     "consequent_startid", "consequent_endid"});
  auto ids = [](const std::optional<CharSpan>& s) -> std::pair<std::string, std::string> {
    if (!s) return {"-1", "-1"};
    return {std::to_string(s->start), std::to_string(s->end - 1)};
  };
  for (const auto& item : items) {
    const auto [as, ae] = ids(item.spans.antecedent);
    const auto [cs, ce] = ids(item.spans.consequent);
    out += csv::format_row({item.sentence.id, item.sentence.text, as, ae, cs, ce});
  }
  return out;
}

// --- Tokenization and alignment ----------------------------------------

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// Byte length of a punctuation unit starting at s[i], or 0.
std::size_t leading_punct(std::string_view s, std::size_t i) {
  static constexpr std::string_view kAscii = "\"'([{<`";
  if (kAscii.find(s[i]) != std::string_view::npos) return 1;
  if (s.substr(i, 3) == "\xE2\x80\x9C" || s.substr(i, 3) == "\xE2\x80\x98") return 3;
  return 0;
}

// Byte length of a punctuation unit ending at s[end-1], or 0.
std::size_t trailing_punct(std::string_view s, std::size_t begin, std::size_t end) {
  static constexpr std::string_view kAscii = ".,;:!?)]}>\"'";
  if (end - begin >= 3) {
    const auto tail = s.substr(end - 3, 3);
    if (tail == "\xE2\x80\x9D" || tail == "\xE2\x80\x99" || tail == "\xE2\x80\xA6") return 3;
  }
  if (kAscii.find(s[end - 1]) == std::string_view::npos) return 0;
  // Keep runs of dots together ("...").
  if (s[end - 1] == '.') {
    std::size_t k = end;
    while (k > begin && s[k - 1] == '.') --k;
    if (end - k > 1) return end - k;
  }
  return 1;
}

// Position inside [begin, end) where a clitic starts, or end if none.
std::size_t clitic_start(std::string_view s, std::size_t begin, std::size_t end) {
  const std::string word = lower_ascii(s.substr(begin, end - begin));
  const auto n = word.size();
  if (n > 3 && word.compare(n - 3, 3, "n't") == 0) return end - 3;
  if (n > 5 && word.compare(n - 5, 5, "n\xE2\x80\x99t") == 0) return end - 5;
  static const std::array<std::string_view, 6> kSuffixes = {"s", "re", "ve", "m", "ll", "d"};
  for (std::string_view apos : {std::string_view("'"), std::string_view("\xE2\x80\x99")}) {
    for (auto suf : kSuffixes) {
      const auto len = apos.size() + suf.size();
      if (n > len && word.compare(n - len, apos.size(), apos) == 0 &&
          word.compare(n - suf.size(), suf.size(), suf) == 0)
        return end - len;
    }
  }
  return end;
}

}  // namespace

std::pair<std::vector<std::string>, std::vector<CharSpan>> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::vector<CharSpan> spans;
  auto emit = [&](std::size_t b, std::size_t e) {
    if (e > b) {
      tokens.emplace_back(text.substr(b, e - b));
      spans.push_back({b, e});
    }
  };

  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t begin = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    std::size_t end = i;
    if (end == begin) continue;

    while (begin < end) {
      const auto len = leading_punct(text, begin);
      if (!len) break;
      emit(begin, begin + len);
      begin += len;
    }
    std::vector<CharSpan> trailing;
    while (end > begin) {
      const auto len = trailing_punct(text, begin, end);
      if (!len) break;
      trailing.push_back({end - len, end});
      end -= len;
    }
    if (end > begin) {
      const auto cut = clitic_start(text, begin, end);
      emit(begin, cut);
      emit(cut, end);
    }
    for (auto it = trailing.rbegin(); it != trailing.rend(); ++it) emit(it->start, it->end);
  }
  return {std::move(tokens), std::move(spans)};
}

std::vector<CharSpan> locate_tokens(std::string_view text, const std::vector<std::string>& tokens) {
  std::vector<CharSpan> out;
  out.reserve(tokens.size());
  std::size_t cursor = 0;
  for (const auto& tok : tokens) {
    if (tok.empty()) throw FormatError("empty token");
    const auto pos = text.find(tok, cursor);
    if (pos == std::string_view::npos) throw FormatError("token '" + tok + "' not found in sentence text");
    out.push_back({pos, pos + tok.size()});
    cursor = pos + tok.size();
  }
  return out;
}

std::vector<Chunk> align_spans_to_chunks(const std::vector<CharSpan>& offsets, const SpanAnnotation& ann) {
  std::vector<Chunk> labels;
  labels.reserve(offsets.size());
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    const bool in_a = ann.antecedent && offsets[i].overlaps(*ann.antecedent);
    const bool in_c = ann.consequent && offsets[i].overlaps(*ann.consequent);
    if (in_a && in_c) throw AlignmentError("token " + std::to_string(i) + " overlaps both antecedent and consequent");
    labels.push_back(in_a ? Chunk::A : in_c ? Chunk::C : Chunk::I);
  }
  return labels;
}

std::vector<Chunk> align_spans_to_chunks(const TaggedSentence& tagged, const SpanAnnotation& ann) {
  return align_spans_to_chunks(tagged.offsets, ann);
}

// --- CoNLL-like tagged format ------------------------------------------

namespace {

// Offsets over the implied text "tok1 tok2 ..." when the raw text is unknown.
std::vector<CharSpan> joined_offsets(const std::vector<std::string>& tokens) {
  std::vector<CharSpan> out;
  std::size_t pos = 0;
  for (const auto& t : tokens) {
    out.push_back({pos, pos + t.size()});
    pos += t.size() + 1;
  }
  return out;
}

}  // namespace

std::vector<TaggedSentence> parse_conll(std::string_view text) {
  std::vector<TaggedSentence> out;
  TaggedSentence cur;
  std::vector<std::vector<std::string>> rows;
  std::size_t block_line = 0;
  std::size_t line_no = 0;

  auto flush = [&] {
    if (rows.empty()) {
      cur = TaggedSentence{};
      return;
    }
    const std::size_t ncol = rows.front().size();
    for (auto& r : rows) {
      cur.tokens.push_back(r[0]);
      cur.tags.push_back(r[1]);
    }
    std::size_t chunk_col = 0, ner_col = 0;
    if (ncol == 4) {
      ner_col = 2;
      chunk_col = 3;
    } else if (ncol == 3) {
      const bool all_chunks =
          std::all_of(rows.begin(), rows.end(), [](const auto& r) { return parse_chunk(r[2]).has_value(); });
      (all_chunks ? chunk_col : ner_col) = 2;
    }
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (ner_col) cur.ner.push_back(rows[k][ner_col]);
      if (chunk_col) {
        const auto c = parse_chunk(rows[k][chunk_col]);
        if (!c) throw FormatError("chunk label must be A, C or I, got '" + rows[k][chunk_col] + "'", block_line + k);
        cur.chunks.push_back(*c);
      }
    }
    if (cur.text.empty()) {
      cur.offsets = joined_offsets(cur.tokens);
    } else {
      try {
        cur.offsets = locate_tokens(cur.text, cur.tokens);
      } catch (const FormatError& e) {
        throw FormatError(std::string("sentence '") + cur.id + "': " + e.what(), block_line);
      }
    }
    out.push_back(std::move(cur));
    cur = TaggedSentence{};
    rows.clear();
  };

  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    ++line_no;
    const bool last = nl == text.size();
    pos = nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (line.empty()) {
      flush();
    } else if (line.front() == '#' && line.find('\t') == std::string_view::npos) {
      if (!rows.empty()) throw FormatError("comment line inside a sentence block", line_no);
      if (line.starts_with("# id: ")) {
        cur.id = std::string(line.substr(6));
      } else if (line.starts_with("# text: ")) {
        cur.text = std::string(line.substr(8));
      }
    } else {
      auto cols = io::split(line, '\t');
      if (cols.size() < 2 || cols.size() > 4)
        throw FormatError("expected 2 to 4 tab-separated columns, found " + std::to_string(cols.size()), line_no);
      if (rows.empty()) {
        block_line = line_no;
      } else if (cols.size() != rows.front().size()) {
        throw FormatError("ragged columns: expected " + std::to_string(rows.front().size()) + ", found " +
                              std::to_string(cols.size()),
                          line_no);
      }
      if (cols[0].empty()) throw FormatError("empty token", line_no);
      rows.push_back(std::move(cols));
    }
    if (last) break;
  }
  flush();
  return out;
}

std::string format_conll(const std::vector<TaggedSentence>& sentences) {
  std::string out;
  for (const auto& s : sentences) {
    s.validate();
    if (!s.id.empty()) out += "# id: " + s.id + "\n";
    if (!s.text.empty()) {
      std::string flat = s.text;
      std::replace(flat.begin(), flat.end(), '\n', ' ');
      std::replace(flat.begin(), flat.end(), '\r', ' ');
      out += "# text: " + flat + "\n";
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      out += s.tokens[i];
      out += '\t';
      out += s.tags[i];
      if (s.has_ner()) {
        out += '\t';
        out += s.ner[i];
      }
      if (s.has_chunks()) {
        out += '\t';
        out += chunk_char(s.chunks[i]);
      }
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

std::vector<TaggedSentence> read_conll(const std::filesystem::path& path) { return parse_conll(io::read_file(path)); }

void write_conll(const std::vector<TaggedSentence>& sentences, const std::filesystem::path& path) {
  io::write_file_atomic(path, format_conll(sentences));
}

// --- Splits --------------------------------------------------------------

void SplitSpec::validate() const {
  for (double f : {train_fraction, valid_fraction, test_fraction})
    if (!(f > 0.0 && f < 1.0)) throw ValidationError("split fractions must lie in (0, 1)");
  if (std::abs(train_fraction + valid_fraction + test_fraction - 1.0) > 1e-9)
    throw ValidationError("split fractions must sum to 1");
}

SplitSizes split_sizes(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  SplitSizes s;
  s.valid = static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.valid_fraction + 1e-9));
  s.test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.test_fraction + 1e-9));
  s.train = n - s.valid - s.test;
  return s;
}

}  // namespace cfd
