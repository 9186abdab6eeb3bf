#include "cfdetect/tagger.hpp"

#include <algorithm>
#include <cctype>

#include "cfdetect/io.hpp"
#include "cfdetect/rng.hpp"

namespace cfd {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

const std::string kStart = "<S>";
const std::string kEnd = "</S>";

// Accumulator for the averaged perceptron: each weight keeps a running total
// and the step at which it last changed.
struct AveragedWeight {
  double value = 0.0;
  double total = 0.0;
  long long stamp = 0;
};

}  // namespace

double TaggerModel::weight(const std::string& feature, const std::string& tag) const {
  auto it = weights_.find(feature);
  if (it == weights_.end()) return 0.0;
  auto jt = it->second.find(tag);
  return jt == it->second.end() ? 0.0 : jt->second;
}

std::vector<std::string> tagger_features(const std::vector<std::string>& tokens, std::size_t i,
                                         const std::string& prev_tag) {
  const std::string& word = tokens[i];
  const std::string lw = lower(word);
  std::vector<std::string> f;
  f.reserve(12);
  f.emplace_back("bias");
  f.push_back("w=" + word);
  f.push_back("lw=" + lw);
  for (std::size_t k = 1; k <= 3; ++k)
    if (lw.size() >= k) f.push_back("s" + std::to_string(k) + "=" + lw.substr(lw.size() - k));
  f.push_back("pw=" + (i == 0 ? kStart : lower(tokens[i - 1])));
  f.push_back("nw=" + (i + 1 == tokens.size() ? kEnd : lower(tokens[i + 1])));
  f.push_back("pt=" + prev_tag);
  if (!word.empty() && std::isupper(static_cast<unsigned char>(word[0]))) f.emplace_back("shape=cap");
  if (std::any_of(word.begin(), word.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
    f.emplace_back("shape=digit");
  if (word.find('-') != std::string::npos) f.emplace_back("shape=hyphen");
  return f;
}

TaggerModel train_tagger(const std::vector<TaggedSentence>& data, int epochs, std::uint64_t seed) {
  if (data.empty()) throw TrainingError("tagger: empty training data");
  if (epochs < 1) throw TrainingError("tagger: epochs must be >= 1");

  TaggerModel model;
  for (const auto& s : data) {
    if (s.tags.size() != s.tokens.size() || s.tokens.empty())
      throw TrainingError("tagger: sentence '" + s.id + "' is not fully tagged");
    model.tagset_.insert(s.tags.begin(), s.tags.end());
  }

  std::unordered_map<std::string, std::map<std::string, AveragedWeight>> acc;
  long long step = 0;

  auto predict = [&](const std::vector<std::string>& feats) {
    std::map<std::string, double> scores;
    for (const auto& f : feats) {
      auto it = acc.find(f);
      if (it == acc.end()) continue;
      for (const auto& [t, w] : it->second) scores[t] += w.value;
    }
    const std::string* best = nullptr;
    double best_score = 0.0;
    for (const auto& t : model.tagset_) {
      auto it = scores.find(t);
      const double sc = it == scores.end() ? 0.0 : it->second;
      if (!best || sc > best_score) {
        best = &t;
        best_score = sc;
      }
    }
    return *best;
  };
  auto bump = [&](const std::string& f, const std::string& t, double delta) {
    auto& w = acc[f][t];
    w.total += static_cast<double>(step - w.stamp) * w.value;
    w.stamp = step;
    w.value += delta;
  };

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (auto idx : order) {
      const auto& s = data[idx];
      std::string prev = kStart;
      for (std::size_t i = 0; i < s.size(); ++i) {
        const auto feats = tagger_features(s.tokens, i, prev);
        const std::string guess = predict(feats);
        ++step;
        if (guess != s.tags[i]) {
          for (const auto& f : feats) {
            bump(f, s.tags[i], 1.0);
            bump(f, guess, -1.0);
          }
        }
        prev = guess;
      }
    }
  }

  for (auto& [f, per_tag] : acc) {
    for (auto& [t, w] : per_tag) {
      const double total = w.total + static_cast<double>(step - w.stamp) * w.value;
      const double avg = total / static_cast<double>(step);
      if (avg != 0.0) model.weights_[f][t] = avg;
    }
  }
  model.averaged_ = true;
  return model;
}

std::vector<std::string> tag(const TaggerModel& model, const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  if (model.tagset_.empty()) throw ValidationError("tagger: model has an empty tagset");
  std::string prev = kStart;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::map<std::string, double> scores;
    for (const auto& f : tagger_features(tokens, i, prev)) {
      auto it = model.weights_.find(f);
      if (it == model.weights_.end()) continue;
      for (const auto& [t, w] : it->second) scores[t] += w;
    }
    const std::string* best = nullptr;
    double best_score = 0.0;
    for (const auto& t : model.tagset_) {
      auto it = scores.find(t);
      const double sc = it == scores.end() ? 0.0 : it->second;
      if (!best || sc > best_score) {
        best = &t;
        best_score = sc;
      }
    }
    out.push_back(*best);
    prev = *best;
  }
  return out;
}

std::string TaggerModel::serialize() const {
  std::string out = "#tagset";
  for (const auto& t : tagset_) out += "\t" + t;
  out += "\n#averaged\t";
  out += averaged_ ? "1" : "0";
  out += '\n';
  std::vector<const std::string*> feats;
  feats.reserve(weights_.size());
  for (const auto& [f, _] : weights_) feats.push_back(&f);
  std::sort(feats.begin(), feats.end(), [](auto* a, auto* b) { return *a < *b; });
  for (const auto* f : feats)
    for (const auto& [t, w] : weights_.at(*f)) out += *f + "\t" + t + "\t" + io::format_double(w) + "\n";
  return out;
}

TaggerModel TaggerModel::deserialize(std::string_view text) {
  TaggerModel m;
  const auto lines = io::split(text, '\n');
  bool have_tagset = false;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    std::string_view line = lines[n];
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto cols = io::split(line, '\t');
    if (cols[0] == "#tagset") {
      m.tagset_.insert(cols.begin() + 1, cols.end());
      have_tagset = true;
      continue;
    }
    if (cols[0] == "#averaged") {
      m.averaged_ = cols.size() > 1 && cols[1] == "1";
      continue;
    }
    if (!have_tagset) throw FormatError("tagger model: missing #tagset header", n + 1);
    if (cols.size() != 3) throw FormatError("tagger model: expected feature<TAB>tag<TAB>weight", n + 1);
    if (!m.tagset_.count(cols[1])) throw FormatError("tagger model: tag '" + cols[1] + "' not in tagset", n + 1);
    try {
      m.weights_[cols[0]][cols[1]] = io::parse_double(cols[2]);
    } catch (const FormatError& e) {
      throw FormatError(std::string("tagger model: ") + e.what(), n + 1);
    }
  }
  if (!have_tagset) throw FormatError("tagger model: missing #tagset header", 1);
  return m;
}

void TaggerModel::save(const std::filesystem::path& path) const { io::write_file_atomic(path, serialize()); }

TaggerModel TaggerModel::load(const std::filesystem::path& path) { return deserialize(io::read_file(path)); }

TaggedSentence normalize_tags(const TaggedSentence& tagged, const TagNormalization& norm) {
  static const std::set<std::string> kSubjectTags = {"PRP", "NN", "NNS", "NNP", "NNPS"};
  static const std::set<std::string> kDeterminerTags = {"DT", "PRP$", "POS", "WP$"};

  TaggedSentence out = tagged;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::string w = lower(out.tokens[i]);
    if (norm.modal_lexemes.count(w)) {
      out.tags[i] = "MD";
    } else if (norm.negation_to_rp && (w == "not" || w == "n't" || w == "n\xE2\x80\x99t")) {
      out.tags[i] = "RP";
    } else if (norm.wish_disambiguation && w == "wish") {
      std::size_t j = i;
      while (j > 0) {
        const auto& t = out.tags[j - 1];
        const std::string lw = lower(out.tokens[j - 1]);
        const bool skippable = t.starts_with("RB") || (t == "DT" && (lw == "both" || lw == "all"));
        if (!skippable) break;
        --j;
      }
      if (j > 0 && kSubjectTags.count(out.tags[j - 1])) out.tags[i] = "VBP";
    } else if (norm.wish_disambiguation && w == "wishes") {
      if (i > 0 && kDeterminerTags.count(out.tags[i - 1])) out.tags[i] = "NNS";
    }
  }
  return out;
}

}  // namespace cfd
