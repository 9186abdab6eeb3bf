#include "cfdetect/pipeline.hpp"

#include <array>
#include <cctype>

#include "cfdetect/corpus.hpp"
#include "cfdetect/error.hpp"
#include "cfdetect/io.hpp"
#include "json.hpp"

namespace cfd {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr std::array<std::string_view, 4> kVectorizerNames = {"BOW", "TFIDF", "EMBEDDING", "GRAMMAR"};

void require_file(const fs::path& p, std::string_view what) {
  if (p.empty()) throw ValidationError(std::string(what) + " path is required");
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) throw IoError(std::string(what) + " file not found: " + p.string());
}

ordered_json cleaning_to_json(const CleaningProfile& p) {
  return {{"lowercase", p.lowercase},
          {"strip_numbers", p.strip_numbers},
          {"strip_punct", p.strip_punct},
          {"expand_contractions", p.expand_contractions},
          {"split_compounds", p.split_compounds},
          {"drop_single_char_tokens", p.drop_single_char_tokens},
          {"remove_stopwords", p.remove_stopwords},
          {"stem", p.stem},
          {"collapse_whitespace", p.collapse_whitespace}};
}

CleaningProfile cleaning_from_json(const ordered_json& j) {
  CleaningProfile p;
  p.lowercase = j.at("lowercase").get<bool>();
  p.strip_numbers = j.at("strip_numbers").get<bool>();
  p.strip_punct = j.at("strip_punct").get<bool>();
  p.expand_contractions = j.at("expand_contractions").get<bool>();
  p.split_compounds = j.at("split_compounds").get<bool>();
  p.drop_single_char_tokens = j.at("drop_single_char_tokens").get<bool>();
  p.remove_stopwords = j.at("remove_stopwords").get<bool>();
  p.stem = j.at("stem").get<bool>();
  p.collapse_whitespace = j.at("collapse_whitespace").get<bool>();
  p.validate();
  return p;
}

}  // namespace

std::string_view vectorizer_name(VectorizerKind k) { return kVectorizerNames[static_cast<std::size_t>(k)]; }

VectorizerKind parse_vectorizer(std::string_view name) {
  std::string upper(name);
  for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (std::size_t i = 0; i < kVectorizerNames.size(); ++i)
    if (upper == kVectorizerNames[i]) return static_cast<VectorizerKind>(i);
  throw ValidationError("unknown vectorizer '" + std::string(name) + "' (expected bow, tfidf, embedding or grammar)");
}

void VectorizerConfig::validate() const {
  switch (kind) {
    case VectorizerKind::BOW:
    case VectorizerKind::TFIDF:
      if (min_freq < 1) throw ValidationError("vectorizer min_freq must be >= 1");
      break;
    case VectorizerKind::EMBEDDING:
      require_file(embeddings, "embeddings");
      break;
    case VectorizerKind::GRAMMAR:
      require_file(tagger_model, "tagger model");
      if (!patterns.empty()) require_file(patterns, "patterns");
      break;
  }
}

TextPipeline::TextPipeline(CleaningProfile cleaning, StopwordSet stopwords, VectorizerConfig vectorizer)
    : cleaning_(cleaning), stopwords_(std::move(stopwords)), vectorizer_(std::move(vectorizer)) {
  cleaning_.validate();
  if (cleaning_.remove_stopwords && stopwords_.empty())
    throw ValidationError("cleaning profile removes stopwords but the stopword set is empty");
}

std::vector<std::string> TextPipeline::tokens(std::string_view text) const {
  return io::split_ws(clean(text, cleaning_, stopwords_));
}

void TextPipeline::fit(const std::vector<std::string>& texts) {
  vectorizer_.validate();
  switch (vectorizer_.kind) {
    case VectorizerKind::BOW:
    case VectorizerKind::TFIDF: {
      std::vector<TokenList> docs;
      docs.reserve(texts.size());
      for (const auto& t : texts) docs.push_back(tokens(t));
      vocab_ = build_vocab(docs, vectorizer_.min_freq);
      break;
    }
    case VectorizerKind::EMBEDDING:
      embeddings_ = std::make_shared<const EmbeddingTable>(EmbeddingTable::load(vectorizer_.embeddings));
      break;
    case VectorizerKind::GRAMMAR:
      tagger_ = std::make_shared<const TaggerModel>(TaggerModel::load(vectorizer_.tagger_model));
      grammar_ = std::make_shared<const Grammar>(vectorizer_.patterns.empty() ? default_grammar()
                                                                               : parse_pattern_file(vectorizer_.patterns));
      break;
  }
  fitted_ = true;
}

std::size_t TextPipeline::dim() const {
  if (!fitted_) throw ValidationError("pipeline is not fitted");
  switch (vectorizer_.kind) {
    case VectorizerKind::BOW:
    case VectorizerKind::TFIDF:
      return vocab_.size();
    case VectorizerKind::EMBEDDING:
      return embeddings_->dim;
    case VectorizerKind::GRAMMAR:
      return grammar_->feature_dim();
  }
  return 0;
}

SparseVector TextPipeline::transform(std::string_view text) const {
  if (!fitted_) throw ValidationError("pipeline is not fitted");
  switch (vectorizer_.kind) {
    case VectorizerKind::BOW:
      return bow(tokens(text), vocab_);
    case VectorizerKind::TFIDF:
      return tfidf_transform(tokens(text), vocab_);
    case VectorizerKind::EMBEDDING:
      return SparseVector::from_dense(embed_average(tokens(text), *embeddings_));
    case VectorizerKind::GRAMMAR: {
      TaggedSentence s;
      s.tokens = tokenize(text).first;
      s.tags = tag(*tagger_, s.tokens);
      s = normalize_tags(s);
      auto v = SparseVector::from_dense(featurize(*grammar_, s.tags).dense());
      v.dim = grammar_->feature_dim();
      return v;
    }
  }
  return {};
}

void TextPipeline::save(const fs::path& dir) const {
  if (!fitted_) throw ValidationError("pipeline is not fitted");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());

  ordered_json j;
  j["format"] = "cfdetect-pipeline v1";
  j["cleaning"] = cleaning_to_json(cleaning_);
  ordered_json v = {{"kind", std::string(vectorizer_name(vectorizer_.kind))}};
  switch (vectorizer_.kind) {
    case VectorizerKind::BOW:
    case VectorizerKind::TFIDF:
      v["min_freq"] = vectorizer_.min_freq;
      io::write_file_atomic(dir / "vocab.tsv", vocab_.serialize());
      break;
    case VectorizerKind::EMBEDDING:
      v["embeddings"] = fs::absolute(vectorizer_.embeddings).string();
      break;
    case VectorizerKind::GRAMMAR:
      io::write_file_atomic(dir / "tagger.model", tagger_->serialize());
      if (!vectorizer_.patterns.empty())
        io::write_file_atomic(dir / "grammar.patterns", io::read_file(vectorizer_.patterns));
      break;
  }
  j["vectorizer"] = v;
  if (cleaning_.remove_stopwords) {
    std::string words;
    for (const auto& w : stopwords_.words()) words += w + "\n";
    io::write_file_atomic(dir / "stopwords.txt", words);
  }
  io::write_file_atomic(dir / "pipeline.json", j.dump(2) + "\n");
}

TextPipeline TextPipeline::load(const fs::path& dir) {
  ordered_json j;
  try {
    j = ordered_json::parse(io::read_file(dir / "pipeline.json"));
    if (j.at("format").get<std::string>() != "cfdetect-pipeline v1")
      throw FormatError("pipeline.json: unsupported format");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("pipeline.json: ") + e.what());
  }
  try {
    const auto cleaning = cleaning_from_json(j.at("cleaning"));
    const auto& v = j.at("vectorizer");
    VectorizerConfig cfg;
    cfg.kind = parse_vectorizer(v.at("kind").get<std::string>());
    StopwordSet stopwords;
    if (cleaning.remove_stopwords) stopwords = StopwordSet::load(dir / "stopwords.txt");
    TextPipeline p(cleaning, std::move(stopwords), cfg);
    switch (cfg.kind) {
      case VectorizerKind::BOW:
      case VectorizerKind::TFIDF:
        p.vectorizer_.min_freq = v.at("min_freq").get<std::size_t>();
        p.vocab_ = Vocabulary::deserialize(io::read_file(dir / "vocab.tsv"));
        break;
      case VectorizerKind::EMBEDDING:
        p.vectorizer_.embeddings = v.at("embeddings").get<std::string>();
        p.embeddings_ = std::make_shared<const EmbeddingTable>(EmbeddingTable::load(p.vectorizer_.embeddings));
        break;
      case VectorizerKind::GRAMMAR:
        p.vectorizer_.tagger_model = dir / "tagger.model";
        p.tagger_ = std::make_shared<const TaggerModel>(TaggerModel::load(p.vectorizer_.tagger_model));
        if (fs::exists(dir / "grammar.patterns")) p.vectorizer_.patterns = dir / "grammar.patterns";
        p.grammar_ = std::make_shared<const Grammar>(
            p.vectorizer_.patterns.empty() ? default_grammar() : parse_pattern_file(p.vectorizer_.patterns));
        break;
    }
    p.fitted_ = true;
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("pipeline.json: ") + e.what());
  }
}

}  // namespace cfd
