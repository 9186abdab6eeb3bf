#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "cfdetect/error.hpp"
#include "cfdetect/rng.hpp"

namespace cfd {

struct Sentence {
  std::string id;
  std::string text;
};

struct LabeledSentence {
  Sentence sentence;
  int label = 0;
};

// Half-open byte interval [start, end) into a sentence's raw text.
struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  bool overlaps(const CharSpan& o) const { return start < o.end && o.start < end; }
  friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

struct SpanAnnotation {
  std::optional<CharSpan> antecedent;
  std::optional<CharSpan> consequent;

  friend bool operator==(const SpanAnnotation&, const SpanAnnotation&) = default;
};

// Throws ValidationError unless both spans lie inside a text of `text_len`
// bytes and do not overlap.
void validate_annotation(const SpanAnnotation& ann, std::size_t text_len);

// Per-token segment label: Antecedent, Consequent, or neither.
enum class Chunk : std::uint8_t { A = 0, C = 1, I = 2 };
inline constexpr std::array<Chunk, 3> kChunkLabels = {Chunk::A, Chunk::C, Chunk::I};

char chunk_char(Chunk c);
// Accepts exactly "A", "C" or "I"; anything else yields nullopt.
std::optional<Chunk> parse_chunk(std::string_view s);

// Tokens with POS tags and optional NER/chunk columns. Empty `ner` or
// `chunks` means the column is absent. `text` is the raw sentence when known;
// `offsets` index into it.
struct TaggedSentence {
  std::string id;
  std::string text;
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
  std::vector<std::string> ner;
  std::vector<Chunk> chunks;
  std::vector<CharSpan> offsets;

  std::size_t size() const { return tokens.size(); }
  bool has_ner() const { return !ner.empty(); }
  bool has_chunks() const { return !chunks.empty(); }

  // Checks the parallel-length and offset-ordering invariants.
  void validate() const;
};

// --- Task files ---------------------------------------------------------

std::vector<LabeledSentence> load_task1_csv(const std::filesystem::path& path);
std::vector<LabeledSentence> parse_task1_csv(std::string_view text);

struct Task2Item {
  Sentence sentence;
  SpanAnnotation spans;
};

// Task 2 columns: sentenceID, sentence, antecedent_startid, antecedent_endid,
// consequent_startid, consequent_endid. End ids are inclusive on disk and
// converted to half-open spans; -1/-1 marks an absent span.
std::vector<Task2Item> load_task2_csv(const std::filesystem::path& path);
std::vector<Task2Item> parse_task2_csv(std::string_view text);
std::string format_task2_csv(const std::vector<Task2Item>& items);

// --- Tokenization and alignment ----------------------------------------

// Whitespace and punctuation tokenizer that splits English clitics
// (n't, 's, 're, 've, 'm, 'll, 'd) and records byte offsets.
std::pair<std::vector<std::string>, std::vector<CharSpan>> tokenize(std::string_view text);

// Locates each token in `text` left to right. Throws FormatError when a token
// cannot be found after the previous one.
std::vector<CharSpan> locate_tokens(std::string_view text, const std::vector<std::string>& tokens);

// A token is labeled A (C) when it shares at least one byte with the
// antecedent (consequent) span, otherwise I.
std::vector<Chunk> align_spans_to_chunks(const TaggedSentence& tagged, const SpanAnnotation& ann);
std::vector<Chunk> align_spans_to_chunks(const std::vector<CharSpan>& offsets, const SpanAnnotation& ann);

// --- CoNLL-like tagged format ------------------------------------------

std::vector<TaggedSentence> parse_conll(std::string_view text);
std::string format_conll(const std::vector<TaggedSentence>& sentences);
std::vector<TaggedSentence> read_conll(const std::filesystem::path& path);
void write_conll(const std::vector<TaggedSentence>& sentences, const std::filesystem::path& path);

// --- Splits --------------------------------------------------------------

struct SplitSpec {
  double train_fraction = 0.4;
  double valid_fraction = 0.3;
  double test_fraction = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SplitSizes {
  std::size_t train = 0;
  std::size_t valid = 0;
  std::size_t test = 0;
};

// Floor allocation for valid and test; the remainder goes to train.
SplitSizes split_sizes(std::size_t n, const SplitSpec& spec);

template <typename T>
struct Split {
  std::vector<T> train;
  std::vector<T> valid;
  std::vector<T> test;
};

// Seeded shuffle, then consecutive blocks of the requested sizes.
template <typename T>
Split<T> split_dataset(const std::vector<T>& items, SplitSizes sizes, std::uint64_t seed) {
  if (items.empty()) throw ValidationError("cannot split an empty dataset");
  if (sizes.train + sizes.valid + sizes.test != items.size())
    throw ValidationError("split sizes " + std::to_string(sizes.train) + "/" + std::to_string(sizes.valid) + "/" +
                          std::to_string(sizes.test) + " do not sum to " + std::to_string(items.size()));
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  Split<T> out;
  std::size_t k = 0;
  for (; k < sizes.train; ++k) out.train.push_back(items[order[k]]);
  for (; k < sizes.train + sizes.valid; ++k) out.valid.push_back(items[order[k]]);
  for (; k < order.size(); ++k) out.test.push_back(items[order[k]]);
  return out;
}

template <typename T>
Split<T> split_dataset(const std::vector<T>& items, const SplitSpec& spec) {
  spec.validate();
  if (items.empty()) throw ValidationError("cannot split an empty dataset");
  return split_dataset(items, split_sizes(items.size(), spec), spec.seed);
}

}  // namespace cfd
