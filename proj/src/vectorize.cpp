#include "cfdetect/vectorize.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cfdetect/error.hpp"
#include "cfdetect/io.hpp"

namespace cfd {

SparseVector SparseVector::from_dense(const DenseVector& v) {
  SparseVector s;
  s.dim = v.size();
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] != 0.0) s.entries.emplace_back(i, v[i]);
  return s;
}

DenseVector SparseVector::to_dense() const {
  DenseVector v(dim, 0.0);
  for (const auto& [i, x] : entries) v[i] = x;
  return v;
}

double SparseVector::get(std::size_t i) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), i, [](const auto& e, std::size_t k) { return e.first < k; });
  return it != entries.end() && it->first == i ? it->second : 0.0;
}

double SparseVector::norm() const {
  double s = 0.0;
  for (const auto& [_, x] : entries) s += x * x;
  return std::sqrt(s);
}

double SparseVector::dot(const DenseVector& w) const {
  double s = 0.0;
  for (const auto& [i, x] : entries) s += w[i] * x;
  return s;
}

void SparseVector::validate() const {
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (entries[k].first >= dim) throw ValidationError("sparse vector position out of range");
    if (entries[k].second == 0.0) throw ValidationError("sparse vector stores an explicit zero");
    if (k && entries[k].first <= entries[k - 1].first) throw ValidationError("sparse vector positions not increasing");
  }
}

long long Vocabulary::index(std::string_view term) const {
  auto it = index_.find(std::string(term));
  return it == index_.end() ? -1 : static_cast<long long>(it->second);
}

Vocabulary build_vocab(const std::vector<TokenList>& docs, std::size_t min_freq) {
  if (docs.empty()) throw ValidationError("build_vocab: empty corpus");
  if (min_freq < 1) throw ValidationError("build_vocab: min_freq must be >= 1");
  std::map<std::string, std::size_t> df;
  for (const auto& doc : docs) {
    const std::set<std::string> unique(doc.begin(), doc.end());
    for (const auto& t : unique) ++df[t];
  }
  Vocabulary v;
  v.n_docs_ = docs.size();
  v.min_freq_ = min_freq;
  for (const auto& [term, count] : df) {
    if (count < min_freq) continue;
    v.index_.emplace(term, v.terms_.size());
    v.terms_.push_back(term);
    v.doc_freq_.push_back(count);
  }
  return v;
}

std::string Vocabulary::serialize() const {
  std::string out = "#vocab\t" + std::to_string(n_docs_) + "\t" + std::to_string(min_freq_) + "\n";
  for (std::size_t i = 0; i < terms_.size(); ++i) out += terms_[i] + "\t" + std::to_string(doc_freq_[i]) + "\n";
  return out;
}

Vocabulary Vocabulary::deserialize(std::string_view text) {
  Vocabulary v;
  const auto lines = io::split(text, '\n');
  if (lines.empty() || !lines[0].starts_with("#vocab\t")) throw FormatError("vocabulary: missing #vocab header", 1);
  const auto head = io::split(lines[0], '\t');
  if (head.size() != 3) throw FormatError("vocabulary: malformed header", 1);
  v.n_docs_ = static_cast<std::size_t>(io::parse_int(head[1]));
  v.min_freq_ = static_cast<std::size_t>(io::parse_int(head[2]));
  for (std::size_t n = 1; n < lines.size(); ++n) {
    if (lines[n].empty()) continue;
    const auto cols = io::split(lines[n], '\t');
    if (cols.size() != 2) throw FormatError("vocabulary: expected term<TAB>doc_freq", n + 1);
    if (!v.terms_.empty() && cols[0] <= v.terms_.back()) throw FormatError("vocabulary: terms not sorted", n + 1);
    v.index_.emplace(cols[0], v.terms_.size());
    v.terms_.push_back(cols[0]);
    v.doc_freq_.push_back(static_cast<std::size_t>(io::parse_int(cols[1])));
  }
  return v;
}

SparseVector bow(const TokenList& doc, const Vocabulary& vocab) {
  std::map<std::size_t, double> counts;
  for (const auto& t : doc) {
    const auto i = vocab.index(t);
    if (i >= 0) counts[static_cast<std::size_t>(i)] += 1.0;
  }
  SparseVector v;
  v.dim = vocab.size();
  v.entries.assign(counts.begin(), counts.end());
  return v;
}

double smooth_idf(std::size_t n_docs, std::size_t doc_freq) {
  return std::log((1.0 + static_cast<double>(n_docs)) / (1.0 + static_cast<double>(doc_freq))) + 1.0;
}

SparseVector tfidf_transform(const TokenList& doc, const Vocabulary& vocab) {
  SparseVector v = bow(doc, vocab);
  for (auto& [i, x] : v.entries) x *= smooth_idf(vocab.n_docs(), vocab.doc_freq(i));
  const double n = v.norm();
  if (n > 0.0)
    for (auto& [_, x] : v.entries) x /= n;
  return v;
}

EmbeddingTable EmbeddingTable::parse(std::string_view text) {
  EmbeddingTable table;
  const auto lines = io::split(text, '\n');
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const auto cols = io::split_ws(lines[n]);
    if (cols.empty()) continue;
    if (n == 0 && cols.size() == 2) {
      // "count dim" header
      try {
        io::parse_int(cols[0]);
        table.dim = static_cast<std::size_t>(io::parse_int(cols[1]));
        continue;
      } catch (const FormatError&) {
      }
    }
    if (cols.size() < 2) throw FormatError("embedding: expected 'word v1 ... vdim'", n + 1);
    DenseVector v;
    v.reserve(cols.size() - 1);
    try {
      for (std::size_t k = 1; k < cols.size(); ++k) v.push_back(io::parse_double(cols[k]));
    } catch (const FormatError& e) {
      throw FormatError(std::string("embedding: ") + e.what(), n + 1);
    }
    if (table.dim == 0) table.dim = v.size();
    if (v.size() != table.dim)
      throw FormatError("embedding: expected " + std::to_string(table.dim) + " values, found " +
                            std::to_string(v.size()),
                        n + 1);
    table.vectors[cols[0]] = std::move(v);
  }
  if (table.dim == 0) throw FormatError("embedding: empty table");
  return table;
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) { return parse(io::read_file(path)); }

DenseVector embed_average(const TokenList& doc, const EmbeddingTable& table) {
  DenseVector sum(table.dim, 0.0);
  std::size_t hits = 0;
  for (const auto& t : doc) {
    auto it = table.vectors.find(t);
    if (it == table.vectors.end()) continue;
    for (std::size_t k = 0; k < table.dim; ++k) sum[k] += it->second[k];
    ++hits;
  }
  if (hits)
    for (auto& x : sum) x /= static_cast<double>(hits);
  return sum;
}

std::map<std::string, DenseVector> parse_sentence_vectors(std::string_view text) {
  std::map<std::string, DenseVector> out;
  std::size_t dim = 0;
  const auto lines = io::split(text, '\n');
  for (std::size_t n = 0; n < lines.size(); ++n) {
    std::string_view line = lines[n];
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw FormatError("sentence vectors: expected id<TAB>values", n + 1);
    DenseVector v;
    try {
      for (const auto& x : io::split_ws(line.substr(tab + 1))) v.push_back(io::parse_double(x));
    } catch (const FormatError& e) {
      throw FormatError(std::string("sentence vectors: ") + e.what(), n + 1);
    }
    if (v.empty()) throw FormatError("sentence vectors: empty vector", n + 1);
    if (dim == 0) dim = v.size();
    if (v.size() != dim) throw FormatError("sentence vectors: inconsistent dimension", n + 1);
    if (!out.emplace(std::string(line.substr(0, tab)), std::move(v)).second)
      throw FormatError("sentence vectors: duplicate id", n + 1);
  }
  return out;
}

std::map<std::string, DenseVector> load_sentence_vectors(const std::filesystem::path& path) {
  return parse_sentence_vectors(io::read_file(path));
}

}  // namespace cfd
